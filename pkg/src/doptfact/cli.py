"""Command-line interface: JSON config in, JSON results + CSV tables out.

Config files follow the versioned schema ``doptfact/1``; unknown keys are
rejected so typos cannot silently change a run.  All stochastic work derives
per-task seeds from the single master seed, and results embed the RNG
identifier so runs are reproducible across platforms.  Exit codes: 0 on
success, 2 for validation problems, 3 for numerical/estimability failures,
4 when an iteration cap was hit without convergence.
"""

import argparse
import csv
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from .dcrit import check_allocation, det_objective, uniqueness_rank
from .errors import EstimabilityError, NumericalError, ValidationError
from .ewbayes import (
    Normal,
    PriorSpec,
    QuadratureConfig,
    Uniform,
    bayes_design,
    efficiency_report,
    ew_design,
    expected_weights,
    relative_efficiency,
    sample_weights,
)
from .fractions import (
    best_half_fraction,
    fraction_select,
    most_robust_minsupport,
    regular_fraction_optimal_23,
    regular_fraction_region_logit_23,
    robustness_scan_many,
)
from .model import (
    LINKS,
    ModelSpec,
    build_design_matrix,
    level_matrix,
    main_effects,
    nu,
    weight_range,
    weights,
)
from .optimize import (
    DesignReport,
    OptimizerConfig,
    exchange_int,
    exchange_real,
    lift_one,
    lift_one_modified,
    verify_optimal,
)
from .seeding import RNG_ID, SEED_DERIVATION, derive_seed

SCHEMA = "doptfact/1"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_NO_CONVERGENCE = 4


# ---------------------------------------------------------------- config ---

def _check_keys(obj: dict, allowed, path: str):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ValidationError(
            f"unknown key(s) {sorted(unknown)} at {path}; allowed: {sorted(allowed)}"
        )


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ValidationError("config root must be a JSON object")
    _check_keys(cfg, {
        "schema", "model", "beta", "prior", "seed", "optimizer", "quadrature",
        "n_total", "m", "strategy", "reps", "designs", "quantiles",
        "weight_boxes", "region_grid",
    }, "$")
    if cfg.get("schema") != SCHEMA:
        raise ValidationError(f"config schema must be {SCHEMA!r}, got {cfg.get('schema')!r}")
    if "model" not in cfg:
        raise ValidationError("config needs a 'model' section")
    return cfg


def build_model(cfg) -> tuple:
    m = cfg["model"]
    if not isinstance(m, dict):
        raise ValidationError("'model' must be an object")
    _check_keys(m, {"k", "effects", "factors", "link"}, "$.model")
    if "k" not in m:
        raise ValidationError("model needs 'k'")
    k = m["k"]
    if not isinstance(k, int):
        raise ValidationError("'k' must be an integer")
    effects = m.get("effects")
    if effects is None:
        effects = [list(e) for e in main_effects(k)]
    if not all(isinstance(e, list) for e in effects):
        raise ValidationError("'effects' must be a list of lists of factor indices")
    names = m.get("factors", [f"F{j}" for j in range(1, k + 1)])
    if len(names) != k:
        raise ValidationError(f"'factors' must name all {k} factors")
    spec = ModelSpec(k=k, effects=tuple(tuple(e) for e in effects),
                     link=m.get("link", "logit"))
    return spec, build_design_matrix(spec), list(names)


def build_beta(cfg, spec) -> np.ndarray:
    if "beta" not in cfg:
        raise ValidationError("this command needs 'beta' in the config")
    beta = np.asarray(cfg["beta"], dtype=float)
    if beta.shape != (spec.n_params,):
        raise ValidationError(
            f"beta must have {spec.n_params} entries, got {beta.shape}"
        )
    return beta


def build_prior(cfg, spec) -> PriorSpec:
    if "prior" not in cfg:
        raise ValidationError("this command needs 'prior' in the config")
    raw = cfg["prior"]
    if not isinstance(raw, list) or len(raw) != spec.n_params:
        raise ValidationError(f"'prior' must list {spec.n_params} distributions")
    margins = []
    for j, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ValidationError(f"prior entry {j} must be an object")
        dist = entry.get("dist")
        if dist == "uniform":
            _check_keys(entry, {"dist", "lo", "hi"}, f"$.prior[{j}]")
            margins.append(Uniform(float(entry["lo"]), float(entry["hi"])))
        elif dist == "normal":
            _check_keys(entry, {"dist", "mean", "sd"}, f"$.prior[{j}]")
            margins.append(Normal(float(entry["mean"]), float(entry["sd"])))
        else:
            raise ValidationError(f"prior entry {j}: unknown dist {dist!r}")
    return PriorSpec(tuple(margins))


def build_optimizer(cfg, seed, mode="lift_one_modified") -> OptimizerConfig:
    opt = cfg.get("optimizer", {})
    _check_keys(opt, {"mode", "max_rounds", "tol_rel", "start"}, "$.optimizer")
    return OptimizerConfig(
        max_rounds=opt.get("max_rounds", 10_000),
        tol_rel=opt.get("tol_rel", 1e-10),
        seed=seed,
        mode=opt.get("mode", mode),
        start=opt.get("start", "uniform"),
    )


def build_quadrature(cfg, seed) -> QuadratureConfig:
    qc = cfg.get("quadrature", {})
    _check_keys(qc, {"method", "nodes_per_dim", "samples"}, "$.quadrature")
    return QuadratureConfig(
        method=qc.get("method", "tensor_gauss"),
        nodes_per_dim=qc.get("nodes_per_dim", 32),
        samples=qc.get("samples", 10_000),
        seed=seed,
    )


# ---------------------------------------------------------------- output ---

def _fmt(x) -> str:
    return f"{x:.12g}"


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def report_dict(rep: DesignReport) -> dict:
    out = {
        "allocation": rep.allocation,
        "objective": rep.objective,
        "rounds_used": rep.rounds_used,
        "converged": rep.converged,
        "support_size": rep.support_size,
    }
    if rep.n_total is not None:
        out["n_total"] = rep.n_total
    if rep.verification is not None:
        out["verification"] = {
            "optimal": rep.verification.optimal,
            "tags": list(rep.verification.tags),
            "max_violation": rep.verification.max_violation,
            "tol": rep.verification.tol,
        }
    return out


class OutputBundle:
    """Collects the JSON document and named CSV tables for one command."""

    def __init__(self, command: str, cfg: dict, seed: int, reproducible: bool):
        self.doc = {
            "schema": SCHEMA,
            "command": command,
            "seed": seed,
            "rng": {"algorithm": RNG_ID, "seed_derivation": SEED_DERIVATION},
        }
        if not reproducible:
            self.doc["timestamp"] = datetime.datetime.now(
                datetime.timezone.utc
            ).isoformat()
        self.tables = {}

    def add_table(self, name: str, header, rows):
        self.tables[name] = (list(header), [list(r) for r in rows])

    def emit(self, out_dir):
        text = json.dumps(_jsonable(self.doc), indent=2, sort_keys=True)
        print(text)
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "result.json").write_text(text + "\n")
            for name, (header, rows) in self.tables.items():
                with open(out / f"{name}.csv", "w", newline="\n") as fh:
                    writer = csv.writer(fh, lineterminator="\n")
                    writer.writerow(header)
                    for row in rows:
                        writer.writerow([
                            _fmt(v) if isinstance(v, (float, np.floating)) else v
                            for v in row
                        ])


def _allocation_table(spec, X, names, alloc, w=None, counts=None):
    lv = level_matrix(spec.k)
    header = ["row"] + names + (["weight"] if w is not None else []) \
        + ["allocation"] + (["count"] if counts is not None else [])
    rows = []
    for i in range(spec.n_points):
        row = [i + 1] + [int(v) for v in lv[i]]
        if w is not None:
            row.append(float(w[i]))
        row.append(float(alloc[i]))
        if counts is not None:
            row.append(int(counts[i]))
        rows.append(row)
    return header, rows


# -------------------------------------------------------------- commands ---

def _uniform_alloc(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def cmd_design(args) -> int:
    cfg = load_config(args.config)
    spec, X, names = build_model(cfg)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    bundle = OutputBundle(f"design {args.kind}", cfg, seed, args.reproducible)
    bundle.doc["model"] = {"k": spec.k, "effects": [list(e) for e in spec.effects],
                           "link": spec.link, "factors": names}
    opt_cfg = build_optimizer(cfg, derive_seed(seed, "design"))
    exit_code = EXIT_OK

    if args.kind == "local":
        beta = build_beta(cfg, spec)
        w = weights(spec, X, beta)
        rep = _run_optimizer(X, w, opt_cfg)
        bundle.doc["beta"] = beta
        bundle.doc["weights"] = w
        bundle.doc["report"] = report_dict(rep)
        bundle.add_table("allocation", *_allocation_table(spec, X, names,
                                                          rep.allocation, w=w))
        if not rep.converged:
            exit_code = EXIT_NO_CONVERGENCE
        if args.integer is not None or "n_total" in cfg:
            n_total = args.integer if args.integer is not None else cfg["n_total"]
            irep = exchange_int(X, w, int(n_total),
                                OptimizerConfig(seed=derive_seed(seed, "design-int")))
            bundle.doc["integer_report"] = report_dict(irep)
            bundle.add_table("allocation_integer",
                             *_allocation_table(spec, X, names,
                                                irep.allocation / irep.n_total,
                                                w=w, counts=irep.allocation))
            if not irep.converged:
                exit_code = EXIT_NO_CONVERGENCE
    else:
        prior = build_prior(cfg, spec)
        q = build_quadrature(cfg, derive_seed(seed, "quadrature"))
        ew = expected_weights(spec, X, prior, q)
        bundle.doc["expected_weights"] = ew.w
        bundle.doc["expected_weights_error"] = ew.error
        bundle.doc["quadrature_method"] = ew.method
        if args.kind == "ew":
            rep = lift_one_modified(X, ew.w, opt_cfg)
            bundle.doc["report"] = report_dict(rep)
            designs = {"ew": rep.allocation, "uniform": _uniform_alloc(spec.n_points)}
            compare = ("ew", "uniform")
            if not args.no_bayes:
                brep = bayes_design(spec, X, prior, q,
                                    OptimizerConfig(seed=derive_seed(seed, "bayes")))
                designs["bayes"] = brep.allocation
                compare = ("ew", "bayes")
                bundle.doc["bayes_report"] = report_dict(brep)
            eff = efficiency_report(spec, X, prior, designs, q, compare)
            bundle.doc["efficiency"] = {
                "phi": eff.phi_values,
                "relative_efficiency": eff.relative_efficiency,
                "compared": list(compare),
            }
            if "bayes" in designs:
                d = spec.n_params - 1
                bundle.doc["efficiency"]["uniform_vs_bayes"] = relative_efficiency(
                    eff.phi_values["uniform"], eff.phi_values["bayes"], d)
                bundle.doc["efficiency"]["ew_vs_bayes"] = relative_efficiency(
                    eff.phi_values["ew"], eff.phi_values["bayes"], d)
        else:  # bayes
            rep = bayes_design(spec, X, prior, q,
                               OptimizerConfig(seed=derive_seed(seed, "bayes")))
            bundle.doc["report"] = report_dict(rep)
            eff = efficiency_report(
                spec, X, prior,
                {"bayes": rep.allocation, "uniform": _uniform_alloc(spec.n_points)},
                q, ("uniform", "bayes"))
            bundle.doc["efficiency"] = {
                "phi": eff.phi_values,
                "relative_efficiency": eff.relative_efficiency,
                "compared": ["uniform", "bayes"],
            }
        bundle.add_table("allocation", *_allocation_table(spec, X, names,
                                                          rep.allocation, w=ew.w))
        if not rep.converged:
            exit_code = EXIT_NO_CONVERGENCE
        if args.integer is not None or "n_total" in cfg:
            n_total = args.integer if args.integer is not None else cfg["n_total"]
            irep = exchange_int(X, ew.w, int(n_total),
                                OptimizerConfig(seed=derive_seed(seed, "design-int")))
            bundle.doc["integer_report"] = report_dict(irep)
            bundle.add_table("allocation_integer",
                             *_allocation_table(spec, X, names,
                                                irep.allocation / irep.n_total,
                                                w=ew.w, counts=irep.allocation))
            if not irep.converged:
                exit_code = EXIT_NO_CONVERGENCE

    bundle.emit(args.out)
    return exit_code


def _run_optimizer(X, w, config: OptimizerConfig) -> DesignReport:
    runner = {
        "lift_one": lift_one,
        "lift_one_modified": lift_one_modified,
        "exchange_real": exchange_real,
    }.get(config.mode)
    if runner is None:
        raise ValidationError(
            f"mode {config.mode!r} needs n_total; use 'design local --integer N'"
        )
    return runner(X, w, config)


def cmd_fraction(args) -> int:
    cfg = load_config(args.config)
    spec, X, names = build_model(cfg)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    bundle = OutputBundle("fraction", cfg, seed, args.reproducible)
    bundle.doc["model"] = {"k": spec.k, "effects": [list(e) for e in spec.effects],
                           "link": spec.link, "factors": names}
    if "beta" in cfg:
        beta = build_beta(cfg, spec)
        w = weights(spec, X, beta)
        bundle.doc["beta"] = beta
    else:
        prior = build_prior(cfg, spec)
        q = build_quadrature(cfg, derive_seed(seed, "quadrature"))
        w = expected_weights(spec, X, prior, q).w
    bundle.doc["weights"] = w

    m = args.m if args.m is not None else cfg.get("m", spec.n_points // 2)
    strategy = args.strategy if args.strategy else cfg.get("strategy", "enumerate")
    opt_cfg = build_optimizer(cfg, derive_seed(seed, "fraction"))
    full = lift_one_modified(X, w, opt_cfg)

    if strategy == "enumerate":
        if m != spec.n_points // 2:
            raise ValidationError("strategy 'enumerate' searches half-fractions; "
                                  "use --m with a selection strategy instead")
        res = best_half_fraction(X, w, opt_cfg)
        support, alloc, objective = res.fraction.support, res.fraction.allocation, res.objective
        bundle.doc["method"] = res.method
    else:
        sel = fraction_select(X, w, int(m), strategy.replace("-", "_"), opt_cfg)
        support, alloc, objective = sel.fraction.support, sel.fraction.allocation, sel.objective
        bundle.doc["method"] = sel.strategy
        bundle.doc["estimable"] = sel.estimable

    D = spec.n_params
    bundle.doc["fraction"] = {
        "support": [int(i) + 1 for i in support],
        "allocation": alloc,
        "objective": objective,
        "efficiency_vs_unrestricted": (objective / full.objective) ** (1.0 / D)
        if full.objective > 0 else 0.0,
    }
    bundle.doc["unrestricted_objective"] = full.objective
    bundle.add_table("fraction_allocation",
                     *_allocation_table(spec, X, names, alloc, w=w))

    # regular-fraction predicates for the 2^3 main-effects setting
    if spec.k == 3 and spec.effects == main_effects(3):
        try:
            bundle.doc["regular_fraction_optimal"] = regular_fraction_optimal_23(w)
        except ValidationError:
            pass
        if "beta" in cfg and spec.link == "logit" and cfg["beta"][1] == 0:
            b = cfg["beta"]
            bundle.doc["regular_fraction_region"] = regular_fraction_region_logit_23(
                b[0], b[2], b[3])

    if args.region_grid:
        grid_cfg = cfg.get("region_grid", {})
        _check_keys(grid_cfg, {"beta0", "beta3"}, "$.region_grid")
        lo0, hi0, n0 = grid_cfg.get("beta0", [-6.0, 6.0, 60])
        lo3, hi3, n3 = grid_cfg.get("beta3", [-6.0, 6.0, 60])
        rows = []
        for b0 in np.linspace(lo0, hi0, int(n0)):
            for b3 in np.linspace(lo3, hi3, int(n3)):
                rows.append([float(b0), float(b3),
                             int(regular_fraction_region_logit_23(b0, 0.0, b3))])
        bundle.add_table("region_grid", ["beta0", "beta3", "regular_optimal"], rows)

    bundle.emit(args.out)
    return EXIT_OK


def cmd_robust(args) -> int:
    cfg = load_config(args.config)
    spec, X, names = build_model(cfg)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    prior = build_prior(cfg, spec)
    q = build_quadrature(cfg, derive_seed(seed, "quadrature"))
    reps = args.reps if args.reps is not None else cfg.get("reps", 1000)
    levels = cfg.get("quantiles", [90, 95, 99, 100])
    tokens = (args.designs.split(",") if args.designs
              else cfg.get("designs", ["uniform", "ew"]))
    bundle = OutputBundle("robust", cfg, seed, args.reproducible)
    bundle.doc["model"] = {"k": spec.k, "effects": [list(e) for e in spec.effects],
                           "link": spec.link, "factors": names}
    bundle.doc["reps"] = int(reps)

    designs = {}
    for token in tokens:
        token = token.strip()
        if token == "uniform":
            designs["uniform"] = _uniform_alloc(spec.n_points)
        elif token == "ew":
            rep = ew_design(spec, X, prior, q,
                            OptimizerConfig(seed=derive_seed(seed, "robust-ew")))
            designs["ew"] = rep.allocation
        elif token == "ebeta":
            w = weights(spec, X, prior.mean_vector())
            rep = lift_one_modified(X, w,
                                    OptimizerConfig(seed=derive_seed(seed, "robust-eb")))
            designs["ebeta"] = rep.allocation
        elif token.startswith("file:"):
            designs[token] = _load_allocation(token[5:], spec.n_points)[0]
        else:
            raise ValidationError(
                f"unknown design token {token!r}; use uniform, ew, ebeta or file:PATH"
            )
    reports, best = robustness_scan_many(spec, X, designs, prior, int(reps),
                                         seed, levels=levels)
    bundle.doc["designs"] = {name: designs[name] for name in designs}
    bundle.doc["quantiles"] = {
        name: rep.quantiles for name, rep in reports.items()
    }
    bundle.doc["mean_sd"] = {
        name: {"mean": rep.mean, "sd": rep.sd} for name, rep in reports.items()
    }
    bundle.doc["per_scenario_best"] = best
    header = ["design"] + [f"R{level}" for level in sorted(best)] + ["mean", "sd"]
    rows = []
    for name, rep in reports.items():
        rows.append([name] + [rep.quantiles[level] for level in sorted(best)]
                    + [rep.mean, rep.sd])
    rows.append(["per_scenario_best"] + [best[level] for level in sorted(best)]
                + ["", ""])
    bundle.add_table("loss_quantiles", header, rows)
    losses_rows = []
    for name, rep in reports.items():
        for s, v in enumerate(rep.losses):
            losses_rows.append([name, s, float(v)])
    bundle.add_table("losses", ["design", "scenario", "loss"], losses_rows)
    bundle.emit(args.out)
    return EXIT_OK


def _load_allocation(path, n_points):
    """Allocation from JSON ({'allocation': [...]}) or one-column CSV.

    Accepts proportions summing to 1 or integer counts; counts are
    normalized and the total reported."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read allocation file: {exc}")
    try:
        data = json.loads(text)
        vals = data["allocation"] if isinstance(data, dict) else data
    except (json.JSONDecodeError, KeyError):
        try:
            lines = [ln for ln in text.strip().splitlines() if ln.strip()]
            start = 1 if lines and not _is_number(lines[0].split(",")[-1]) else 0
            vals = [float(ln.split(",")[-1]) for ln in lines[start:]]
        except ValueError:
            raise ValidationError(f"allocation file {path} is neither JSON nor CSV")
    arr = np.asarray(vals, dtype=float)
    if arr.shape != (n_points,):
        raise ValidationError(
            f"allocation has {arr.shape[0] if arr.ndim else 0} entries, "
            f"expected {n_points}"
        )
    total = arr.sum()
    if abs(total - 1.0) <= 1e-12:
        return check_allocation(arr, n_points), None
    if total > 1.0 and np.allclose(arr, np.round(arr), atol=1e-9):
        return check_allocation(arr / total, n_points), int(round(total))
    raise ValidationError("allocation must sum to 1 or be integer counts")


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    spec, X, names = build_model(cfg)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    if "beta" in cfg:
        w = weights(spec, X, build_beta(cfg, spec))
    else:
        prior = build_prior(cfg, spec)
        q = build_quadrature(cfg, derive_seed(seed, "quadrature"))
        w = expected_weights(spec, X, prior, q).w
    p, n_total = _load_allocation(args.allocation, spec.n_points)
    bundle = OutputBundle("verify", cfg, seed, args.reproducible)
    bundle.doc["model"] = {"k": spec.k, "effects": [list(e) for e in spec.effects],
                           "link": spec.link, "factors": names}
    bundle.doc["weights"] = w
    bundle.doc["allocation"] = p
    if n_total is not None:
        bundle.doc["n_total"] = n_total
    if det_objective(X, w, p) <= 0:
        raise EstimabilityError("inestimable support: |X'WX| = 0 at this allocation")
    result = verify_optimal(X, w, p)
    rank, soldim = uniqueness_rank(X, w)
    bundle.doc["verification"] = {
        "optimal": result.optimal,
        "tags": list(result.tags),
        "max_violation": result.max_violation,
        "tol": result.tol,
    }
    bundle.doc["uniqueness"] = {"rank": rank, "solution_dim": soldim,
                                "unique": soldim == 0}
    bundle.emit(args.out)
    return EXIT_OK


def cmd_weights(args) -> int:
    cfg = load_config(args.config)
    spec, X, names = build_model(cfg)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    bundle = OutputBundle("weights", cfg, seed, args.reproducible)
    bundle.doc["model"] = {"k": spec.k, "effects": [list(e) for e in spec.effects],
                           "link": spec.link, "factors": names}
    if "beta" in cfg:
        w = weights(spec, X, build_beta(cfg, spec))
        bundle.doc["weights"] = w
        err = None
    else:
        prior = build_prior(cfg, spec)
        q = build_quadrature(cfg, derive_seed(seed, "quadrature"))
        ew = expected_weights(spec, X, prior, q)
        w, err = ew.w, ew.error
        bundle.doc["weights"] = w
        bundle.doc["weights_error"] = err
        bundle.doc["quadrature_method"] = ew.method
    if "weight_boxes" in cfg:
        boxes = cfg["weight_boxes"]
        a, b = weight_range(spec, boxes)
        bundle.doc["weight_range"] = {"a": a, "b": b, "boxes": boxes}
    lv = level_matrix(spec.k)
    header = ["row"] + names + ["weight"] + (["error"] if err is not None else [])
    rows = []
    for i in range(spec.n_points):
        row = [i + 1] + [int(v) for v in lv[i]] + [float(w[i])]
        if err is not None:
            row.append(float(err[i]))
        rows.append(row)
    bundle.add_table("weights", header, rows)
    etas = np.linspace(-6.0, 6.0, 1201)
    curve = [[float(e)] + [float(nu(link, e)) for link in LINKS] for e in etas]
    bundle.add_table("nu_curve", ["eta"] + list(LINKS), curve)
    bundle.emit(args.out)
    return EXIT_OK


# ------------------------------------------------------------------ main ---

def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doptfact",
        description="D-optimal allocations for two-level factorials with binary response",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON config (schema doptfact/1)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="directory for result.json and CSVs")
        p.add_argument("--reproducible", action="store_true",
                       help="omit the timestamp for byte-identical output")

    p = sub.add_parser("design", help="compute an optimal allocation")
    p.add_argument("kind", choices=["local", "ew", "bayes"])
    p.add_argument("--integer", type=int, default=None, metavar="N",
                   help="also compute the integer allocation for N runs")
    p.add_argument("--no-bayes", action="store_true",
                   help="skip the Bayes comparison in 'design ew'")
    common(p)

    p = sub.add_parser("fraction", help="choose a fractional design")
    p.add_argument("--m", type=int, default=None, help="number of distinct runs")
    p.add_argument("--strategy", default=None,
                   choices=["top-w", "top-p", "exchange", "enumerate"])
    p.add_argument("--region-grid", action="store_true",
                   help="emit the regular-fraction region grid CSV")
    common(p)

    p = sub.add_parser("robust", help="loss-of-efficiency scan for designs")
    p.add_argument("--designs", default=None,
                   help="comma list: uniform, ew, ebeta, file:PATH")
    p.add_argument("--reps", type=int, default=None)
    common(p)

    p = sub.add_parser("verify", help="check an allocation for D-optimality")
    p.add_argument("--allocation", required=True, help="allocation JSON/CSV file")
    common(p)

    p = sub.add_parser("weights", help="emit the (expected) weight table")
    common(p)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    handlers = {
        "design": cmd_design,
        "fraction": cmd_fraction,
        "robust": cmd_robust,
        "verify": cmd_verify,
        "weights": cmd_weights,
    }
    try:
        return handlers[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (EstimabilityError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
