"""Fractional-factorial search, optimality predicates and robustness.

The relative loss of efficiency of an allocation p against a weight vector w
is 1 - (f(p, w) / f(p_w, w))^{1/(d+1)} where p_w is the locally optimal
allocation for w.  Robustness scans draw weight scenarios from a prior on
the coefficients and summarize the loss distribution by quantiles; the most
robust minimally supported design sits on a support maximizing |X[I]|^2 and
attains worst-case loss 1 - a/b when every weight lies in [a, b].
"""

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .dcrit import check_allocation, det_objective, subset_determinants
from .errors import EstimabilityError, NumericalError, ValidationError
from .model import ModelSpec, nu
from .optimize import (
    OptimizerConfig,
    exchange_int,
    lift_one_modified,
    max_det_support,
)
from .seeding import derive_seed, make_rng

ENUMERATION_CAP = 2_000_000
QUANTILE_LEVELS = (90, 95, 99, 100)


@dataclass(frozen=True)
class FractionSpec:
    """A fractional design: support rows plus the allocation living on them."""

    support: tuple
    allocation: np.ndarray

    def __post_init__(self):
        support = tuple(sorted(int(i) for i in self.support))
        if not support:
            raise ValidationError("fraction support is empty")
        object.__setattr__(self, "support", support)
        alloc = check_allocation(self.allocation, len(self.allocation))
        off = np.delete(alloc, support)
        if np.any(off != 0):
            raise ValidationError("allocation must vanish off the support")
        object.__setattr__(self, "allocation", alloc)


@dataclass(frozen=True)
class FractionSearchResult:
    fraction: FractionSpec
    objective: float
    method: str  # 'minimal-exhaustive' | 'exhaustive' | 'heuristic'


@dataclass(frozen=True)
class SelectedFraction:
    fraction: FractionSpec
    objective: float
    strategy: str
    estimable: bool
    fallback: bool = False  # top_p picked an inestimable subset; exchange used


@dataclass(frozen=True)
class MostRobustResult:
    fraction: FractionSpec
    max_loss: float
    bound_guaranteed: bool


@dataclass(frozen=True)
class RobustnessReport:
    losses: np.ndarray
    quantiles: dict
    mean: float
    sd: float


def relative_loss(X, p, w, config: OptimizerConfig = None) -> float:
    """Loss of efficiency of p against the locally optimal design for w."""
    config = config or OptimizerConfig()
    D = X.shape[1]
    opt = lift_one_modified(X, w, config)
    if opt.objective <= 0:
        raise EstimabilityError("model not estimable for this weight vector")
    loss = 1.0 - (det_objective(X, w, p) / opt.objective) ** (1.0 / D)
    if loss < -1e-9:
        raise NumericalError(f"relative loss {loss} below zero beyond tolerance")
    return float(min(max(loss, 0.0), 1.0))


def scenario_weights(spec: ModelSpec, X, prior, reps: int, seed: int) -> np.ndarray:
    """Weight vectors for ``reps`` coefficient draws, one derived seed each."""
    if reps < 1:
        raise ValidationError("reps must be >= 1")
    rows = []
    for s in range(reps):
        rng = make_rng(derive_seed(seed, "scenario", s))
        beta = np.array([m.sample(rng, 1)[0] for m in prior.margins])
        rows.append(nu(spec.link, X @ beta))
    return np.array(rows)


def _scenario_optima(X, w_all, seed):
    """Locally optimal objective (and allocation) for every weight scenario."""
    values = np.empty(w_all.shape[0])
    allocs = np.empty_like(w_all)
    for s, w in enumerate(w_all):
        rep = lift_one_modified(
            X, w, OptimizerConfig(seed=derive_seed(seed, "scenario-opt", s))
        )
        values[s] = rep.objective
        allocs[s] = rep.allocation
    return values, allocs


def _losses_against(X, p, w_all, opt_values):
    D = X.shape[1]
    M = np.einsum("si,ij,il->sjl", w_all * np.asarray(p, float)[None, :], X, X,
                  optimize=True)
    f = np.linalg.det(M)
    ratio = np.clip(f, 0.0, None) / opt_values
    return 1.0 - np.clip(ratio, 0.0, None) ** (1.0 / D)


def _quantiles(losses, levels=QUANTILE_LEVELS):
    qs = np.percentile(losses, levels, method="linear")
    return {int(level): float(v) for level, v in zip(levels, qs)}


def _check_levels(levels):
    levels = tuple(sorted(set(int(v) for v in levels)))
    if not levels or any(not (0 < v <= 100) for v in levels):
        raise ValidationError("quantile levels must lie in (0, 100]")
    return levels


def robustness_scan(spec: ModelSpec, X, p, prior, reps: int, seed: int,
                    levels=QUANTILE_LEVELS) -> RobustnessReport:
    """Loss quantiles of design p over ``reps`` simulated weight scenarios."""
    levels = _check_levels(levels)
    w_all = scenario_weights(spec, X, prior, reps, seed)
    opt_values, _ = _scenario_optima(X, w_all, seed)
    losses = _losses_against(X, np.asarray(p, float), w_all, opt_values)
    return RobustnessReport(
        losses=losses,
        quantiles=_quantiles(losses, levels),
        mean=float(losses.mean()),
        sd=float(losses.std(ddof=1)) if reps > 1 else 0.0,
    )


def robustness_scan_many(spec, X, designs: dict, prior, reps: int, seed: int,
                         levels=QUANTILE_LEVELS):
    """Reports for several designs over one shared scenario set, plus the
    best-achievable column: min over scenario-optimal designs of each loss
    quantile."""
    levels = _check_levels(levels)
    w_all = scenario_weights(spec, X, prior, reps, seed)
    opt_values, opt_allocs = _scenario_optima(X, w_all, seed)
    reports = {}
    for name, p in designs.items():
        losses = _losses_against(X, np.asarray(p, float), w_all, opt_values)
        reports[name] = RobustnessReport(
            losses=losses,
            quantiles=_quantiles(losses, levels),
            mean=float(losses.mean()),
            sd=float(losses.std(ddof=1)) if reps > 1 else 0.0,
        )
    best = {int(level): math.inf for level in levels}
    for s in range(reps):
        losses = _losses_against(X, opt_allocs[s], w_all, opt_values)
        for level, v in _quantiles(losses, levels).items():
            best[level] = min(best[level], v)
    return reports, best


def _restricted_solve(X, w, support, config):
    sub = lift_one_modified(X[list(support)], np.asarray(w, float)[list(support)], config)
    alloc = np.zeros(X.shape[0])
    alloc[list(support)] = sub.allocation
    # restricted objective equals the full objective of the embedded allocation
    return alloc, sub.objective


def best_half_fraction(X, w, config: OptimizerConfig = None,
                       cap: int = ENUMERATION_CAP) -> FractionSearchResult:
    """Best design supported on exactly half of the design points.

    Minimally supported case (2^{k-1} = d+1): single-term scores
    |X[I]|^2 prod w_i decide directly.  Otherwise every half-size support is
    enumerated and solved by restricted lift-one, provided the count stays
    under ``cap``; above it the selection heuristics stand in.
    """
    config = config or OptimizerConfig()
    n, D = X.shape
    m = n // 2
    if m < D:
        raise ValidationError(f"half-fraction size {m} below d+1 = {D}")
    w = np.asarray(w, float)
    if m == D:
        subsets, det2 = subset_determinants(X, D)
        scores = det2 * np.prod(w[subsets], axis=1)
        best = int(np.argmax(scores))  # ties: first in lexicographic order
        if scores[best] <= 0:
            raise EstimabilityError("no nonsingular half-fraction support")
        support = tuple(int(i) for i in subsets[best])
        alloc = np.zeros(n)
        alloc[list(support)] = 1.0 / D
        return FractionSearchResult(
            fraction=FractionSpec(support=support, allocation=alloc),
            objective=scores[best] / D**D,
            method="minimal-exhaustive",
        )
    if math.comb(n, m) <= cap:
        best_alloc, best_val, best_support = None, -1.0, None
        for idx, support in enumerate(itertools.combinations(range(n), m)):
            Xs = X[list(support)]
            if np.linalg.matrix_rank(Xs) < D:
                continue
            alloc, val = _restricted_solve(
                X, w, support, replace(config, seed=derive_seed(config.seed, "half", idx))
            )
            if val > best_val:
                best_alloc, best_val, best_support = alloc, val, support
        if best_support is None:
            raise EstimabilityError("no estimable half-fraction support")
        return FractionSearchResult(
            fraction=FractionSpec(support=best_support, allocation=best_alloc),
            objective=best_val,
            method="exhaustive",
        )
    # enumeration too large: fall back to the selection strategies
    best = None
    for strategy in ("top_w", "top_p", "exchange"):
        try:
            cand = fraction_select(X, w, m, strategy, config)
        except EstimabilityError:
            continue
        if best is None or cand.objective > best.objective:
            best = cand
    if best is None:
        raise EstimabilityError("no estimable half-fraction found heuristically")
    return FractionSearchResult(
        fraction=best.fraction, objective=best.objective, method="heuristic"
    )


def regular_fraction_optimal_23(w) -> bool:
    """Half-fraction optimality of the two regular 2^3 fractions.

    Requires the weight symmetry induced by a null first main effect
    (w1 = w5, w2 = w6, w3 = w7, w4 = w8); holds iff
    4 min(w1..w4) >= max(w1..w4).
    """
    w = np.asarray(w, float)
    if w.shape != (8,):
        raise ValidationError("expects the 8 weights of a 2^3 design")
    scale = max(float(np.max(np.abs(w))), 1e-300)
    if np.any(np.abs(w[:4] - w[4:]) > 1e-9 * scale):
        raise ValidationError(
            "weight symmetry w1=w5, w2=w6, w3=w7, w4=w8 violated"
        )
    return bool(4.0 * np.min(w[:4]) >= np.max(w[:4]))


def _log_ratio_bound(x: float) -> float:
    """log((2 e^x - 1)/(e^x - 2)), +inf when the denominator is nonpositive."""
    if x <= math.log(2.0):
        return math.inf
    return math.log((2.0 * math.exp(x) - 1.0) / (math.exp(x) - 2.0))


def regular_fraction_region_logit_23(beta0: float, beta2: float, beta3: float) -> bool:
    """Closed-form region where the regular 2^3 fractions are the optimal
    half-fractions under the logit link with a null first main effect.

    Three clauses in |beta2|, |beta3| and |beta0|; specializing beta2 = 0
    recovers the two-case condition in |beta3| alone.
    """
    a2, a3 = abs(beta2), abs(beta3)
    s = a2 + a3
    bmax, bmin = max(a2, a3), min(a2, a3)
    if s <= math.log(2.0):
        return True
    knee = math.log(1.0 + math.exp(-bmin)
                    + math.sqrt(1.0 + math.exp(-bmin) + math.exp(-2.0 * bmin)))
    if bmax <= knee and abs(beta0) <= _log_ratio_bound(s):
        return True
    if bmax > knee and bmax <= _log_ratio_bound(bmin) \
            and abs(beta0) <= _log_ratio_bound(bmax) - bmin:
        return True
    return False


def _rank(Xs) -> int:
    return int(np.linalg.matrix_rank(Xs))


def fraction_select(X, w, m: int, strategy: str,
                    config: OptimizerConfig = None) -> SelectedFraction:
    """Pick an m-point fraction by one of the practical strategies.

    top_w: rows of the m largest weights, uniform allocation, with a
    rank-repair swap loop.  top_p: the m largest coordinates of the
    unrestricted optimum, renormalized.  exchange: integer exchange with one
    unit per experimental run.
    """
    config = config or OptimizerConfig()
    n, D = X.shape
    w = np.asarray(w, float)
    if m < D:
        raise ValidationError(f"m must be at least d+1 = {D}")
    if m > n:
        raise ValidationError(f"m must not exceed {n}")
    if strategy == "top_w":
        order = list(np.lexsort((np.arange(n), -w)))
        chosen = order[:m]
        rest = order[m:]
        while _rank(X[sorted(chosen)]) < D:
            if not rest:
                raise EstimabilityError("no estimable m-subset found")
            drop = min(chosen, key=lambda i: (w[i], -i))
            chosen.remove(drop)
            chosen.append(rest.pop(0))
        support = tuple(sorted(chosen))
        alloc = np.zeros(n)
        alloc[list(support)] = 1.0 / m
    elif strategy == "top_p":
        rep = lift_one_modified(X, w, config)
        order = np.lexsort((np.arange(n), -rep.allocation))
        support = tuple(sorted(int(i) for i in order[:m]))
        kept = rep.allocation[list(support)]
        if _rank(X[list(support)]) < D or kept.sum() <= 0:
            # the kept rows cannot estimate the model: hand the budget to
            # the integer exchange instead
            out = fraction_select(X, w, m, "exchange", config)
            return replace(out, strategy="top_p", fallback=True)
        alloc = np.zeros(n)
        alloc[list(support)] = kept / kept.sum()
    elif strategy == "exchange":
        rep = exchange_int(X, w, m, config)
        support = tuple(int(i) for i in np.flatnonzero(rep.allocation > 0))
        alloc = rep.allocation / m
    else:
        raise ValidationError(f"unknown strategy {strategy!r}")
    objective = det_objective(X, w, alloc)
    if objective <= 0:
        raise EstimabilityError("selected fraction is inestimable")
    return SelectedFraction(
        fraction=FractionSpec(support=support, allocation=alloc),
        objective=objective,
        strategy=strategy,
        estimable=True,
    )


def most_robust_minsupport(X, a: float, b: float,
                           cap: int = ENUMERATION_CAP) -> MostRobustResult:
    """Most robust minimally supported design for weights confined to [a, b].

    Uniform allocation on a support maximizing |X[I]|^2; the worst-case
    relative loss is 1 - a/b, guaranteed when k >= 3 and
    d(d+1) <= 2^{k+1} - 4.
    """
    if not (0 < a <= b):
        raise ValidationError(f"need 0 < a <= b, got ({a}, {b})")
    n, D = X.shape
    d = D - 1
    k = int(round(math.log2(n)))
    support, _ = max_det_support(X, cap=cap)
    alloc = np.zeros(n)
    alloc[list(support)] = 1.0 / D
    guaranteed = (k >= 3) and (d * (d + 1) <= 2 ** (k + 1) - 4)
    return MostRobustResult(
        fraction=FractionSpec(support=support, allocation=alloc),
        max_loss=1.0 - a / b,
        bound_guaranteed=guaranteed,
    )


def disjoint_twin(X, I) -> tuple:
    """A disjoint index set with the same squared support determinant.

    Flipping the levels of a factor subset J permutes the rows (index XOR in
    the canonical order) and multiplies columns by signs, so determinants are
    preserved up to sign.  Any J whose XOR mask misses every pairwise row
    XOR of I sends I to a disjoint twin; one exists whenever k >= 3 and
    d(d+1) <= 2^{k+1} - 4.
    """
    n = X.shape[0]
    k = int(round(math.log2(n)))
    if 2**k != n:
        raise ValidationError("X must have 2^k rows in canonical order")
    I = sorted(int(i) for i in I)
    D = len(I)
    d = D - 1
    if k < 3 or d * (d + 1) > 2 ** (k + 1) - 4:
        raise ValidationError("outside the guaranteed regime k >= 3, d(d+1) <= 2^{k+1}-4")
    xors = {i ^ j for i, j in itertools.combinations(I, 2)}
    det_I = abs(float(np.linalg.det(X[I]))) if D == X.shape[1] else None
    for mask in range(1, n):
        if mask in xors:
            continue
        twin = sorted(i ^ mask for i in I)
        if det_I is not None:
            det_T = abs(float(np.linalg.det(X[twin])))
            if not math.isclose(det_I, det_T, rel_tol=1e-9, abs_tol=1e-9):
                raise NumericalError(
                    "twin determinant mismatch: canonical row order violated?"
                )
        return tuple(twin)
    raise NumericalError("no disjoint twin found within the guaranteed regime: internal error")
