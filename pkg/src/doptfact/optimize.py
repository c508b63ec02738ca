"""Coordinate-ascent optimizers on the allocation simplex.

Three search modes share the same machinery:

* ``lift_one``: visit coordinates in a fresh random order each round; move
  one proportion to the closed-form maximizer of its restriction and rescale
  the rest.  Converged when a full round improves the objective by less than
  ``tol_rel`` relatively.
* ``lift_one_modified``: same, except that every 10th round (and once before
  declaring convergence) evaluates all candidate single-coordinate updates
  from the same incumbent and applies only the first best.  This variant
  carries the convergence guarantee, so its fixed points are certified
  global maxima.
* ``exchange_real`` / ``exchange_int``: sweep all index pairs in random
  order, moving budget between the two coordinates via the closed-form
  quadratic maximizer.  The integer variant optimizes run counts directly.

Fixed points of the real-valued modes satisfy the optimality
characterization checked by :func:`verify_optimal`.
"""

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .dcrit import (
    check_allocation,
    det_objective,
    exchange_restriction,
    info_matrix,
    lift_one_restriction,
    maximize_exchange_int,
    maximize_exchange_real,
    maximize_lift_one,
    subset_determinants,
    _det,
)
from .errors import EstimabilityError, ValidationError
from .seeding import make_rng

MODES = ("lift_one", "lift_one_modified", "exchange_real", "exchange_int")
STARTS = ("uniform", "random_dirichlet", "user_supplied")


@dataclass(frozen=True)
class OptimizerConfig:
    max_rounds: int = 10_000
    tol_rel: float = 1e-10
    seed: int = 0
    mode: str = "lift_one_modified"
    start: str = "uniform"
    start_alloc: tuple = None
    restarts: int = 20  # random restarts allowed while hunting a feasible start

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValidationError("max_rounds must be >= 1")
        if not self.tol_rel > 0:
            raise ValidationError("tol_rel must be positive")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if self.start not in STARTS:
            raise ValidationError(f"start must be one of {STARTS}")
        if self.start == "user_supplied" and self.start_alloc is None:
            raise ValidationError("user_supplied start needs start_alloc")


@dataclass(frozen=True)
class VerificationResult:
    optimal: bool
    tags: tuple
    max_violation: float
    tol: float


@dataclass(frozen=True)
class DesignReport:
    allocation: np.ndarray
    objective: float
    rounds_used: int
    converged: bool
    support_size: int
    verification: VerificationResult = None
    n_total: int = None


def _feasible_start(X, w, config, rng):
    n, D = X.shape
    if int(np.sum(w > 0)) < D:
        raise EstimabilityError(
            f"need at least {D} positive weights, got {int(np.sum(w > 0))}"
        )
    candidates = []
    if config.start == "user_supplied":
        candidates.append(check_allocation(np.asarray(config.start_alloc, float), n))
    elif config.start == "uniform":
        candidates.append(np.full(n, 1.0 / n))
    support = np.flatnonzero(w > 0)
    for _ in range(max(config.restarts, 0)):
        p = np.zeros(n)
        p[support] = rng.dirichlet(np.ones(support.size))
        candidates.append(p)
    for p in candidates:
        if det_objective(X, w, p) > 0:
            return p
    raise EstimabilityError("model not estimable with these weights")


def _refresh(X, w, p):
    M = info_matrix(X, w, p)
    return M, float(max(_det(M), 0.0))


def _lift_one_step(X, w, p, i, f, M):
    """Candidate update at coordinate i; returns (z, value)."""
    coef = lift_one_restriction(X, w, p, i, f_of_p=f, M=M)
    return maximize_lift_one(coef)


def _apply_lift_one(X, w, p, i, z, val, M):
    pi = p[i]
    s = (1.0 - z) / (1.0 - pi)
    rank1 = w[i] * np.outer(X[i], X[i])
    M = s * (M - pi * rank1) + z * rank1
    p = p * s
    p[i] = z
    return p, val, M


def _run_lift_one(X, w, config, modified: bool):
    # Accept a move only above the float noise floor; convergence then means
    # the incumbent maximizes every single-coordinate restriction, which is
    # what the optimality characterization certifies.  The configured
    # tol_rel only matters when it is looser than the noise floor.
    rng = make_rng(config.seed)
    n = X.shape[0]
    p = _feasible_start(X, w, config, rng)
    M, f = _refresh(X, w, p)
    noise = 1e-15
    converged = False
    rounds = 0
    pending_certify = False
    while rounds < config.max_rounds:
        rounds += 1
        f_start = f
        accepted = False
        use_best_pass = modified and (rounds % 10 == 0 or pending_certify)
        if use_best_pass:
            # evaluate every candidate from the same incumbent, apply first best
            best = None
            for i in range(n):
                z, val = _lift_one_step(X, w, p, i, f, M)
                if val > f * (1 + noise) and (best is None or val > best[2]):
                    best = (i, z, val)
            if best is not None:
                i, z, val = best
                p, f, M = _apply_lift_one(X, w, p, i, z, val, M)
                accepted = True
        else:
            for i in rng.permutation(n):
                z, val = _lift_one_step(X, w, p, int(i), f, M)
                if val > f * (1 + noise):
                    p, f, M = _apply_lift_one(X, w, p, int(i), z, val, M)
                    accepted = True
        M, f = _refresh(X, w, p)
        small = f - f_start <= config.tol_rel * f_start
        if not accepted or small:
            if modified and not use_best_pass:
                pending_certify = True  # confirm with an all-candidates pass
                continue
            converged = True
            break
        pending_certify = False
    return p, f, rounds, converged


def _polish(X, w, p, f, M, max_sweeps=80):
    """Drive every coordinate to its exact conditional maximizer.

    Near the fixed point, objective improvements are second order in the
    coordinate error while the optimality characterization is first order,
    so a few objective-neutral sweeps sharpen the certificate without
    changing the optimum found.
    """
    n = X.shape[0]
    for _ in range(max_sweeps):
        moved = 0.0
        for i in range(n):
            z, val = _lift_one_step(X, w, p, i, f, M)
            delta = abs(z - p[i])
            if delta > 1e-13 and val >= f * (1 - 1e-13):
                p, f, M = _apply_lift_one(X, w, p, i, z, val, M)
                moved = max(moved, delta)
        M, f = _refresh(X, w, p)
        if moved <= 1e-12:
            break
    return p, f, M


def _report(X, w, p, f, rounds, converged, verify_tol=1e-7, n_total=None):
    verification = None
    if n_total is None and f > 0:
        verification = verify_optimal(X, w, p, tol=verify_tol)
    return DesignReport(
        allocation=p,
        objective=f,
        rounds_used=rounds,
        converged=converged,
        support_size=int(np.sum(p > 0)),
        verification=verification,
        n_total=n_total,
    )


def lift_one(X, w, config: OptimizerConfig = None) -> DesignReport:
    """Plain lift-one ascent; fast, convergence observed but not certified."""
    config = config or OptimizerConfig(mode="lift_one")
    p, f, rounds, converged = _run_lift_one(X, w, config, modified=False)
    p, f, _ = _polish(X, w, p, f, info_matrix(X, w, p))
    return _report(X, w, p, f, rounds, converged)


def lift_one_modified(X, w, config: OptimizerConfig = None) -> DesignReport:
    """Lift-one with periodic first-best rounds; converges to the global max."""
    config = config or OptimizerConfig()
    p, f, rounds, converged = _run_lift_one(X, w, config, modified=True)
    p, f, _ = _polish(X, w, p, f, info_matrix(X, w, p))
    return _report(X, w, p, f, rounds, converged)


def exchange_real(X, w, config: OptimizerConfig = None) -> DesignReport:
    """Pairwise exchange on real-valued proportions."""
    config = config or OptimizerConfig(mode="exchange_real")
    rng = make_rng(config.seed)
    n = X.shape[0]
    pairs = list(itertools.combinations(range(n), 2))
    p = _feasible_start(X, w, config, rng)
    M, f = _refresh(X, w, p)
    converged = False
    rounds = 0
    while rounds < config.max_rounds:
        rounds += 1
        f_start = f
        for idx in rng.permutation(len(pairs)):
            i, j = pairs[idx]
            coef = exchange_restriction(X, w, p, i, j, M=M)
            if coef is None:  # zero budget: leave the pair untouched
                continue
            z, val = maximize_exchange_real(coef, incumbent=p[i])
            if val > f:
                e = coef.budget
                M = M + (z - p[i]) * w[i] * np.outer(X[i], X[i]) \
                      + (e - z - p[j]) * w[j] * np.outer(X[j], X[j])
                p[i], p[j] = z, e - z
                f = val
        M, f = _refresh(X, w, p)
        if f - f_start <= config.tol_rel * f_start:
            converged = True
            break
    p, f, M = _polish(X, w, p, f, M)
    return _report(X, w, p, f, rounds, converged)


def _greedy_support(X, w):
    """Greedily pick d+1 rows keeping |X[I]| away from zero, weight-biased."""
    n, D = X.shape
    order = np.lexsort((np.arange(n), -np.asarray(w, float)))
    chosen = []
    for i in order:
        trial = chosen + [int(i)]
        sub = X[trial]
        if np.linalg.matrix_rank(sub) == len(trial):
            chosen.append(int(i))
        if len(chosen) == D:
            break
    if len(chosen) < D:
        raise EstimabilityError("no nonsingular (d+1)-row support exists")
    return sorted(chosen)


def _round_to_total(target: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder rounding of a nonnegative vector to a fixed sum."""
    base = np.floor(target).astype(int)
    short = total - int(base.sum())
    if short > 0:
        order = np.argsort(-(target - base), kind="stable")
        base[order[:short]] += 1
    elif short < 0:
        order = np.argsort(target - base, kind="stable")
        take = 0
        for i in order:
            if take == -short:
                break
            if base[i] > 0:
                base[i] -= 1
                take += 1
    return base


def _integer_start(X, w, n_total, config, rng):
    D = X.shape[1]
    real = lift_one_modified(X, w, replace(config, mode="lift_one_modified"))
    n = _round_to_total(n_total * real.allocation, n_total)
    if det_objective(X, w, n.astype(float)) > 0:
        return n
    support = _greedy_support(X, w)
    n = np.zeros(X.shape[0], dtype=int)
    n[support] = 1
    spread = _round_to_total(
        np.full(len(support), (n_total - D) / D), n_total - D
    )
    n[support] += spread
    if det_objective(X, w, n.astype(float)) <= 0:
        raise EstimabilityError("could not build a feasible integer start")
    return n


def exchange_int(X, w, n_total: int, config: OptimizerConfig = None) -> DesignReport:
    """Pairwise exchange over integer run counts summing to ``n_total``."""
    config = config or OptimizerConfig(mode="exchange_int")
    nrows, D = X.shape
    if n_total < D:
        raise ValidationError(f"n_total must be at least d+1 = {D}")
    rng = make_rng(config.seed)
    pairs = list(itertools.combinations(range(nrows), 2))
    n = _integer_start(X, w, n_total, config, rng).astype(float)
    M, f = _refresh(X, w, n)
    converged = False
    rounds = 0
    while rounds < config.max_rounds:
        rounds += 1
        changed = False
        for idx in rng.permutation(len(pairs)):
            i, j = pairs[idx]
            coef = exchange_restriction(X, w, n, i, j, M=M)
            if coef is None:
                continue
            z, val = maximize_exchange_int(coef, incumbent=n[i])
            if z != int(n[i]) and val > f:
                m = coef.budget
                M = M + (z - n[i]) * w[i] * np.outer(X[i], X[i]) \
                      + (m - z - n[j]) * w[j] * np.outer(X[j], X[j])
                n[i], n[j] = float(z), float(m - z)
                f = val
                changed = True
        M, f = _refresh(X, w, n)
        if not changed:
            converged = True
            break
    return DesignReport(
        allocation=n.astype(int),
        objective=f,
        rounds_used=rounds,
        converged=converged,
        support_size=int(np.sum(n > 0)),
        verification=None,
        n_total=int(n_total),
    )


def verify_optimal(X, w, p, tol: float = 1e-8) -> VerificationResult:
    """Check the global-optimality characterization of an allocation.

    Per index, either p_i = 0 with f_i(1/2) <= (d+2)/2^{d+1} f(p), or
    0 < p_i <= 1/(d+1) with f_i(0) = (1 - p_i (d+1))/(1-p_i)^{d+1} f(p).
    """
    p = np.asarray(p, float)
    n, Dp = X.shape
    d = Dp - 1
    f = det_objective(X, w, p)
    if f <= 0:
        raise EstimabilityError("characterization inapplicable: f(p) = 0")
    M = info_matrix(X, w, p)
    tags = []
    violations = []
    for i in range(n):
        coef = lift_one_restriction(X, w, p, i, f_of_p=f, M=M)
        if p[i] == 0.0:
            f_half = coef(0.5)
            viol = (f_half - (d + 2) / 2.0 ** (d + 1) * f) / f
            ok = viol <= tol
            tags.append("case_i_zero_ok" if ok else "violated")
        else:
            if p[i] > 1.0 / (d + 1) + tol:
                tags.append("violated")
                violations.append(p[i] - 1.0 / (d + 1))
                continue
            target = (1.0 - p[i] * (d + 1)) / (1.0 - p[i]) ** (d + 1) * f
            viol = abs(coef(0.0) - target) / f
            ok = viol <= tol
            tags.append("case_ii_interior_ok" if ok else "violated")
        violations.append(max(viol, 0.0))
    max_violation = float(max(violations))
    return VerificationResult(
        optimal=all(t != "violated" for t in tags),
        tags=tuple(tags),
        max_violation=max_violation,
        tol=tol,
    )


def verify_minimally_supported(X, w, I) -> bool:
    """Is the uniform design on the (d+1)-row support ``I`` D-optimal?

    Evaluates, for every row i outside I,
    sum_{j in I} |X[{i} u I \\ {j}]|^2 / w_j <= |X[I]|^2 / w_i.
    """
    w = np.asarray(w, float)
    n, D = X.shape
    I = sorted(int(i) for i in I)
    if len(I) != D:
        raise ValidationError(f"support must have d+1 = {D} rows, got {len(I)}")
    if np.any(w <= 0):
        raise ValidationError("minimally supported check requires all w_i > 0")
    det_I = float(np.linalg.det(X[I]))
    if det_I == 0.0:
        raise EstimabilityError("singular support: |X[I]| = 0")
    base = det_I**2
    for i in range(n):
        if i in I:
            continue
        lhs = 0.0
        for j in I:
            rows = sorted(set(I) - {j} | {i})
            lhs += float(np.linalg.det(X[rows])) ** 2 / w[j]
        if lhs > base / w[i]:
            return False
    return True


def max_det_support(X, cap: int = 2_000_000):
    """A (d+1)-row index set maximizing |X[I]|^2 (lexicographically first).

    Exhaustive below ``cap`` subsets; greedy plus pairwise swaps above.
    """
    n, D = X.shape
    if math.comb(n, D) <= cap:
        subsets, det2 = subset_determinants(X, D)
        best = int(np.argmax(det2))  # combinations order = lexicographic
        return tuple(int(v) for v in subsets[best]), float(det2[best])
    support = _greedy_support(X, np.ones(n))
    best_val = float(np.linalg.det(X[support])) ** 2
    improved = True
    while improved:
        improved = False
        for pos in range(D):
            for cand in range(n):
                if cand in support:
                    continue
                trial = sorted(support[:pos] + support[pos + 1:] + [cand])
                val = float(np.linalg.det(X[trial])) ** 2
                if val > best_val:
                    support, best_val = trial, val
                    improved = True
    return tuple(support), best_val
