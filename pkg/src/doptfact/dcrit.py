"""D-criterion evaluation: determinants, restrictions and diagnostics.

The objective for an allocation p is f(p) = |X' W X| with
W = diag(w_1 p_1, ..., w_n p_n).  It expands into a multilinear polynomial
over (d+1)-row subsets,

    f(p) = sum_I |X[I]|^2 prod_{i in I} p_i w_i,

which drives the brute-force oracle, the single-coordinate restriction

    f_i(z) = a z (1-z)^d + b (1-z)^{d+1},

and the pairwise exchange restriction

    f_ij(z) = A z (e-z) + B z + C (e-z) + D.

Coefficients are recovered from a handful of determinant evaluations; both
restrictions have closed-form maximizers.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, OracleInfeasibleError, ValidationError

ORACLE_TERM_CAP = 2_000_000


def check_allocation(p, n_points: int, total: float = 1.0, tol: float = 1e-12):
    """Validate a (real or integer) allocation vector and return it as float."""
    p = np.asarray(p, dtype=float)
    if p.shape != (n_points,):
        raise ValidationError(f"allocation has shape {p.shape}, expected ({n_points},)")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValidationError("allocation entries must be finite and nonnegative")
    if abs(p.sum() - total) > tol * max(1.0, total):
        raise ValidationError(f"allocation sums to {p.sum()!r}, expected {total}")
    return p


def _det(M: np.ndarray) -> float:
    """Determinant; closed-form cofactor expansion for orders 1-3, LU above."""
    n = M.shape[-1]
    if n == 1:
        return M[..., 0, 0]
    if n == 2:
        return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    if n == 3:
        a, b, c = M[..., 0, 0], M[..., 0, 1], M[..., 0, 2]
        d, e, f = M[..., 1, 0], M[..., 1, 1], M[..., 1, 2]
        g, h, i = M[..., 2, 0], M[..., 2, 1], M[..., 2, 2]
        return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    return np.linalg.det(M)


def info_matrix(X: np.ndarray, w: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Information matrix sum_i p_i w_i x_i x_i', symmetrized."""
    w = np.asarray(w, float)
    p = np.asarray(p, float)
    if not (X.shape[0] == w.shape[0] == p.shape[0]):
        raise ValidationError("X, w, p must agree on the number of design points")
    M = X.T @ (X * (w * p)[:, None])
    return 0.5 * (M + M.T)


def det_objective(X, w, p) -> float:
    """f(p) = |X' W X|; tiny negative round-off is clamped to zero."""
    M = info_matrix(X, w, p)
    d = float(_det(M))
    if d < 0:
        scale = max(1.0, float(np.abs(M).max())) ** M.shape[0]
        if d < -1e-12 * scale:
            raise NumericalError(f"determinant {d} below round-off tolerance")
        d = 0.0
    return d


_SUBSET_CACHE: dict = {}


def subset_determinants(X: np.ndarray, size: int):
    """All ``size``-row subsets of X with their squared determinants (cached)."""
    key = (X.tobytes(), X.shape, size)
    hit = _SUBSET_CACHE.get(key)
    if hit is not None:
        return hit
    n = X.shape[0]
    subsets = np.array(list(itertools.combinations(range(n), size)), dtype=np.intp)
    dets = np.linalg.det(X[subsets])
    val = (subsets, dets**2)
    _SUBSET_CACHE[key] = val
    return val


def det_oracle(X, w, p, cap: int = ORACLE_TERM_CAP) -> float:
    """Brute-force f(p) via the subset expansion; independent of det_objective."""
    n, D = X.shape
    terms = math.comb(n, D)
    if terms > cap:
        raise OracleInfeasibleError(
            f"expansion needs {terms} terms, above the cap of {cap}"
        )
    subsets, det2 = subset_determinants(X, D)
    pw = np.asarray(p, float) * np.asarray(w, float)
    return float(det2 @ np.prod(pw[subsets], axis=1))


@dataclass(frozen=True)
class LiftOneCoefficients:
    """f_i(z) = a z (1-z)^d + b (1-z)^{d+1} along the lift-one path at i."""

    a: float
    b: float
    d: int
    i: int

    def __call__(self, z: float) -> float:
        return self.a * z * (1 - z) ** self.d + self.b * (1 - z) ** (self.d + 1)


def lift_one_restriction(X, w, p, i, f_of_p=None, M=None) -> LiftOneCoefficients:
    """Coefficients of the lift-one restriction at coordinate ``i``.

    Needs exactly one extra determinant beyond f(p): f_i(0) when p_i > 0,
    f_i(1/2) when p_i = 0.
    """
    p = np.asarray(p, float)
    D = X.shape[1]
    d = D - 1
    pi = p[i]
    if pi >= 1.0:
        raise ValidationError("lift-one restriction undefined at p_i = 1")
    if M is None:
        M = info_matrix(X, w, p)
    if f_of_p is None:
        f_of_p = det_objective(X, w, p)
    if f_of_p <= 0:
        raise ValidationError("lift-one restriction requires f(p) > 0")
    rank1 = w[i] * np.outer(X[i], X[i])
    if pi > 0:
        b = float(_det(M - pi * rank1)) / (1 - pi) ** D
        a = (f_of_p - b * (1 - pi) ** D) / (pi * (1 - pi) ** d)
    else:
        b = f_of_p
        f_half = float(_det(0.5 * M + 0.5 * rank1))
        a = f_half * 2.0**D - b
    return LiftOneCoefficients(a=max(a, 0.0), b=max(b, 0.0), d=d, i=i)


def maximize_lift_one(c: LiftOneCoefficients) -> tuple:
    """Closed-form maximizer of a z(1-z)^d + b(1-z)^{d+1} on [0, 1]."""
    a, b, d = c.a, c.b, c.d
    if a > b * (d + 1):
        z = (a - b * (d + 1)) / ((a - b) * (d + 1))
        val = (d / (a - b)) ** d * (a / (d + 1)) ** (d + 1) if d > 0 else a
        return z, val
    return 0.0, b


@dataclass(frozen=True)
class ExchangeCoefficients:
    """f_ij(z) = A z(e-z) + B z + C (e-z) + D on 0 <= z <= e (budget e=p_i+p_j)."""

    A: float
    B: float
    C: float
    D: float
    budget: float
    i: int
    j: int

    def __call__(self, z: float) -> float:
        e = self.budget
        return self.A * z * (e - z) + self.B * z + self.C * (e - z) + self.D


def exchange_restriction(X, w, alloc, i, j, M=None):
    """Coefficients of the pairwise exchange restriction, or None on zero budget.

    Works for both real allocations (budget e = p_i + p_j) and integer run
    counts (budget m = n_i + n_j); four determinant evaluations total.
    """
    alloc = np.asarray(alloc, float)
    e = alloc[i] + alloc[j]
    if e <= 0:
        return None
    if M is None:
        M = info_matrix(X, w, alloc)
    Ai = w[i] * np.outer(X[i], X[i])
    Aj = w[j] * np.outer(X[j], X[j])
    M0 = M - alloc[i] * Ai - alloc[j] * Aj
    D0 = float(_det(M0))
    f0 = float(_det(M0 + e * Aj))
    fe = float(_det(M0 + e * Ai))
    fh = float(_det(M0 + 0.5 * e * (Ai + Aj)))
    A = 2.0 / e**2 * (2.0 * fh - f0 - fe)
    B = (fe - D0) / e
    C = (f0 - D0) / e
    return ExchangeCoefficients(
        A=max(A, 0.0), B=max(B, 0.0), C=max(C, 0.0), D=max(D0, 0.0),
        budget=e, i=i, j=j,
    )


def maximize_exchange_real(c: ExchangeCoefficients, incumbent=None) -> tuple:
    """Maximize the exchange quadratic over real 0 <= z <= e."""
    e = c.budget
    if c.A <= 0.0:
        # Linear: max at an endpoint; with B = C any z is optimal, keep incumbent.
        if c.B > c.C:
            return e, c.B * e + c.D
        if c.C > c.B:
            return 0.0, c.C * e + c.D
        z = e / 2 if incumbent is None else incumbent
        return z, c(z)
    delta = (e * c.A + c.B - c.C) / (2.0 * c.A)
    if delta < 0:
        return 0.0, e * c.C + c.D
    if delta > e:
        return e, e * c.B + c.D
    return delta, e * c.C + c.D + (e * c.A + c.B - c.C) ** 2 / (4.0 * c.A)


def maximize_exchange_int(c: ExchangeCoefficients, incumbent=None) -> tuple:
    """Maximize the exchange quadratic over integer 0 <= z <= m."""
    m = int(round(c.budget))
    if c.A <= 0.0:
        if c.B > c.C:
            return m, c.B * m + c.D
        if c.C > c.B:
            return 0, c.C * m + c.D
        z = (m // 2) if incumbent is None else int(incumbent)
        return z, c(z)
    delta = int(math.floor((m * c.A + c.B - c.C) / (2.0 * c.A) + 0.5))
    if delta < 0:
        return 0, m * c.C + c.D
    if delta > m:
        return m, m * c.B + c.D
    val = m * c.C + c.D + (m * c.A + c.B - c.C) * delta - c.A * delta**2
    return delta, val


def uniqueness_rank(X: np.ndarray, w: np.ndarray) -> tuple:
    """Rank diagnostic for uniqueness of the D-optimal allocation.

    Builds the matrix [1, w*g_1, ..., w*g_s] where the g's are the distinct
    pairwise entrywise products of X's columns (g_1 = 1), and returns
    (rank, solution_dim).  solution_dim = 0 certifies a unique optimum.
    """
    n, D = X.shape
    w = np.asarray(w, float)
    seen = {}
    for i in range(D):
        for j in range(i, D):
            g = X[:, i] * X[:, j]
            key = g.tobytes()
            if key not in seen:
                seen[key] = g
    prods = list(seen.values())
    # the all-ones product first, matching the construction
    prods.sort(key=lambda g: 0 if np.all(g == 1.0) else 1)
    cols = [np.ones(n)] + [w * g for g in prods]
    Xw = np.column_stack(cols)
    sv = np.linalg.svd(Xw, compute_uv=False)
    rank = int(np.sum(sv > 1e-9 * sv[0]))
    return rank, n - rank
