"""Priors on coefficients, expected weights, and Bayes-criterion design.

An EW design maximizes |X' E(W) X|: compute E(w_i) = E nu(x_i' beta) under
the prior and reuse the locally optimal machinery.  The Bayes criterion is
phi(p) = E log |X' W(beta) X|, estimated on a frozen Monte-Carlo sample of
beta so that designs under comparison always see identical draws.  By
Jensen's inequality phi(p) <= log |X' E(W) X| for every p, which the test
suite asserts sample-exactly.

Expectations of weights use tensor-product Gauss rules (Legendre for uniform
margins, Hermite for normal) while the coefficient count stays at five or
below, and seeded scrambled-Sobol sampling above that.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .dcrit import subset_determinants
from .errors import ValidationError
from .model import ModelSpec, nu
from .optimize import DesignReport, OptimizerConfig, lift_one_modified, _feasible_start
from .seeding import derive_seed, make_rng

TENSOR_MAX_DIM = 5
_TENSOR_CHUNK = 1 << 22
_REFINE_BUDGET = 1 << 26


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValidationError(f"uniform prior needs lo < hi, got ({self.lo}, {self.hi})")

    def gauss_nodes(self, n):
        t, u = np.polynomial.legendre.leggauss(n)
        mid, half = 0.5 * (self.lo + self.hi), 0.5 * (self.hi - self.lo)
        return mid + half * t, u / 2.0

    def transform(self, q01):
        return self.lo + (self.hi - self.lo) * q01

    def sample(self, rng, size):
        return rng.uniform(self.lo, self.hi, size)

    @property
    def mean(self):
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class Normal:
    mean_: float
    sd: float

    def __post_init__(self):
        if not self.sd > 0:
            raise ValidationError(f"normal prior needs sd > 0, got {self.sd}")

    def gauss_nodes(self, n):
        t, u = np.polynomial.hermite.hermgauss(n)
        return self.mean_ + math.sqrt(2.0) * self.sd * t, u / math.sqrt(math.pi)

    def transform(self, q01):
        return self.mean_ + self.sd * ndtri(q01)

    def sample(self, rng, size):
        return rng.normal(self.mean_, self.sd, size)

    @property
    def mean(self):
        return self.mean_


@dataclass(frozen=True)
class PriorSpec:
    """Independent per-coefficient marginals, ordered like the model effects."""

    margins: tuple

    def __post_init__(self):
        object.__setattr__(self, "margins", tuple(self.margins))
        for m in self.margins:
            if not isinstance(m, (Uniform, Normal)):
                raise ValidationError(f"unsupported prior distribution {m!r}")

    def __len__(self):
        return len(self.margins)

    def mean_vector(self):
        return np.array([m.mean for m in self.margins])


@dataclass(frozen=True)
class QuadratureConfig:
    method: str = "tensor_gauss"
    nodes_per_dim: int = 32
    samples: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("tensor_gauss", "monte_carlo"):
            raise ValidationError("method must be 'tensor_gauss' or 'monte_carlo'")
        if self.nodes_per_dim < 2:
            raise ValidationError("nodes_per_dim must be >= 2")
        if self.samples < 100:
            raise ValidationError("samples must be >= 100")


@dataclass(frozen=True)
class ExpectedWeights:
    w: np.ndarray
    error: np.ndarray
    method: str


@dataclass(frozen=True)
class EfficiencyReport:
    phi_values: dict
    relative_efficiency: float
    d_plus_1: int


def _tensor_row_mean(link, signs, points, wts):
    """E nu(sum_j c_j theta_j) over a tensor product rule, chunked."""
    sizes = [len(p) for p in points]
    split = 0
    while math.prod(sizes[split:]) > _TENSOR_CHUNK:
        split += 1
    rest_eta = np.zeros(1)
    rest_wt = np.ones(1)
    for c, pts, u in zip(signs[split:], points[split:], wts[split:]):
        rest_eta = (rest_eta[:, None] + c * pts[None, :]).ravel()
        rest_wt = (rest_wt[:, None] * u[None, :]).ravel()
    total = 0.0
    for idx in np.ndindex(*sizes[:split]):
        offset = sum(signs[t] * points[t][idx[t]] for t in range(split))
        wt = math.prod(wts[t][idx[t]] for t in range(split))
        total += wt * float(rest_wt @ nu(link, offset + rest_eta))
    return total


def _tensor_expectation(spec, X, prior, n_nodes):
    nodes = [m.gauss_nodes(n_nodes) for m in prior.margins]
    points = [nd[0] for nd in nodes]
    wts = [nd[1] for nd in nodes]
    return np.array([
        _tensor_row_mean(spec.link, row, points, wts) for row in X
    ])


def _sobol_expectation(spec, X, prior, q):
    m = max(7, math.ceil(math.log2(q.samples)))
    sampler = qmc.Sobol(d=len(prior), scramble=True, seed=derive_seed(q.seed, "ew-sobol"))
    u = sampler.random_base2(m)
    beta = np.column_stack([
        marg.transform(np.clip(u[:, j], 1e-12, 1 - 1e-12))
        for j, marg in enumerate(prior.margins)
    ])
    vals = nu(spec.link, beta @ X.T)  # (samples, n_points)
    full = vals.mean(axis=0)
    half = vals[: vals.shape[0] // 2].mean(axis=0)
    return full, np.abs(full - half)


def expected_weights(spec: ModelSpec, X, prior: PriorSpec, q: QuadratureConfig) -> ExpectedWeights:
    """E(w_i) per design point with a refinement-based error estimate."""
    if len(prior) != spec.n_params:
        raise ValidationError(
            f"prior has {len(prior)} margins for {spec.n_params} coefficients"
        )
    D = spec.n_params
    if q.method == "tensor_gauss" and D <= TENSOR_MAX_DIM:
        w = _tensor_expectation(spec, X, prior, q.nodes_per_dim)
        if (2 * q.nodes_per_dim) ** D <= _REFINE_BUDGET:
            w_fine = _tensor_expectation(spec, X, prior, 2 * q.nodes_per_dim)
            return ExpectedWeights(w=w_fine, error=np.abs(w_fine - w), method="tensor_gauss")
        w_coarse = _tensor_expectation(spec, X, prior, q.nodes_per_dim // 2)
        return ExpectedWeights(w=w, error=np.abs(w - w_coarse), method="tensor_gauss")
    w, err = _sobol_expectation(spec, X, prior, q)
    return ExpectedWeights(w=w, error=err, method="sobol")


def ew_design(spec, X, prior, q, optimizer_config: OptimizerConfig = None) -> DesignReport:
    """EW D-optimal design: locally optimal search at the expected weights."""
    ew = expected_weights(spec, X, prior, q)
    return lift_one_modified(X, ew.w, optimizer_config or OptimizerConfig())


def beta_sample(prior: PriorSpec, q: QuadratureConfig) -> np.ndarray:
    """The frozen Monte-Carlo coefficient sample determined by q.seed."""
    rng = make_rng(derive_seed(q.seed, "bayes-sample"))
    return np.column_stack([m.sample(rng, q.samples) for m in prior.margins])


def sample_weights(spec: ModelSpec, X, prior: PriorSpec, q: QuadratureConfig) -> np.ndarray:
    """Per-sample weight vectors nu(X beta_s), shape (samples, n_points)."""
    return nu(spec.link, beta_sample(prior, q) @ X.T)


_LOG_CLAMP = math.log(1e-300)
_EXPANSION_CAP = 20_000


class _SampleLogDet:
    """Per-sample log f(p) = log |X' W_s X| for a frozen weight sample.

    Small models go through the exact subset expansion evaluated with
    logsumexp: it stays correct even when a sample mixes O(1) and
    underflow-scale weights, which matrix arithmetic silently annihilates.
    Larger models fall back to batched slogdet.
    """

    def __init__(self, X, w_samples):
        self.X = X
        self.w = w_samples
        n, D = X.shape
        self.expansion = math.comb(n, D) <= _EXPANSION_CAP
        if self.expansion:
            subsets, det2 = subset_determinants(X, D)
            keep = det2 > 0
            self.subsets = subsets[keep]
            self.logdet2 = np.log(det2[keep])
            with np.errstate(divide="ignore"):
                self.logw = np.log(self.w)

    def logf(self, p):
        p = np.asarray(p, float)
        if self.expansion:
            with np.errstate(divide="ignore"):
                logpw = self.logw + np.log(p)[None, :]
            terms = self.logdet2[None, :] + logpw[:, self.subsets].sum(axis=2)
            peak = terms.max(axis=1)
            safe_peak = np.where(np.isfinite(peak), peak, 0.0)
            with np.errstate(invalid="ignore", divide="ignore"):
                out = safe_peak + np.log(
                    np.exp(terms - safe_peak[:, None]).sum(axis=1)
                )
            return np.where(np.isfinite(peak), out, _LOG_CLAMP)
        M = np.einsum("si,ij,il->sjl", self.w * p[None, :], self.X, self.X,
                      optimize=True)
        sign, logdet = np.linalg.slogdet(M)
        return np.where(sign > 0, logdet, _LOG_CLAMP)


def _normalized_sample_weights(spec, X, prior, q):
    """Frozen sample weights scaled to unit max per sample.

    By homogeneity, f(p; c w) = c^{d+1} f(p; w): the scaling shifts phi by a
    design-independent constant (returned alongside) while keeping the
    determinants representable for extreme coefficient draws."""
    w_samples = sample_weights(spec, X, prior, q)
    scale = np.maximum(w_samples.max(axis=1, keepdims=True), 1e-300)
    log_shift = float(spec.n_params * np.mean(np.log(scale)))
    return w_samples / scale, log_shift


def bayes_objective(spec: ModelSpec, X, prior: PriorSpec, p, q: QuadratureConfig) -> float:
    """phi(p): frozen-sample estimate of E log |X' W X|."""
    p = np.asarray(p, float)
    if int(np.sum(p > 0)) < spec.n_params:
        return -np.inf
    w_norm, log_shift = _normalized_sample_weights(spec, X, prior, q)
    return float(np.mean(_SampleLogDet(X, w_norm).logf(p))) + log_shift


def _golden_max(g, lo, hi, iters=60):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(iters):
        if gc >= gd:
            b, d, gd = d, c, gc
            c = b - invphi * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + invphi * (b - a)
            gd = g(d)
    return 0.5 * (a + b)


def bayes_design(spec: ModelSpec, X, prior: PriorSpec, q: QuadratureConfig,
                 optimizer_config: OptimizerConfig = None) -> DesignReport:
    """Coordinate ascent on phi(p) with per-sample lift-one restrictions.

    Along the lift-one path the averaged log objective changes by
    d log(1-z) + mean_s log(ra_s z + rb_s (1-z)), concave in z, where
    ra_s = a_s / f_s and rb_s = b_s / f_s are scale-free restriction
    coefficients recovered from log-determinant differences.  Each
    coordinate is maximized by golden-section search; working with ratios
    keeps extreme coefficient draws (whose determinants underflow linear
    arithmetic) exact in log space.
    """
    config = optimizer_config or OptimizerConfig()
    n, D = X.shape
    d = D - 1
    w_samples, log_shift = _normalized_sample_weights(spec, X, prior, q)
    evaluator = _SampleLogDet(X, w_samples)
    rng = make_rng(config.seed)
    # start from the EW allocation's feasibility logic on mean weights
    p = _feasible_start(X, w_samples.mean(axis=0), config, rng)
    logf = evaluator.logf(p)
    phi = float(np.mean(logf))
    converged = False
    rounds = 0
    tol_phi = 1e-8
    while rounds < config.max_rounds:
        rounds += 1
        phi_start = phi
        for i in rng.permutation(n):
            i = int(i)
            pi = p[i]
            if pi > 0:
                removed = p / (1 - pi)
                removed[i] = 0.0
                rb = np.exp(np.minimum(evaluator.logf(removed) - logf, 600.0))
                ra = np.maximum(1.0 - rb * (1 - pi) ** D, 0.0) / (pi * (1 - pi) ** d)
            else:
                rb = np.ones(len(logf))
                halved = 0.5 * p
                halved[i] = 0.5
                rh = np.exp(np.minimum(evaluator.logf(halved) - logf, 600.0))
                ra = np.maximum(rh * 2.0**D - 1.0, 0.0)

            def g(z):
                lin = ra * z + rb * (1 - z)
                return d * math.log1p(-z) + float(np.mean(np.log(np.maximum(lin, 1e-300))))

            z_gs = _golden_max(g, 0.0, 1.0 - 1e-9)
            base = g(pi)
            best_z, best_val = pi, base
            for z in (0.0, z_gs):
                val = g(z)
                if val > best_val:
                    best_z, best_val = z, val
            if best_val > base:
                s = (1 - best_z) / (1 - pi)
                p = p * s
                p[i] = best_z
                logf = evaluator.logf(p)
                phi = float(np.mean(logf))
        logf = evaluator.logf(p)
        phi = float(np.mean(logf))
        if phi - phi_start <= tol_phi * max(1.0, abs(phi)):
            converged = True
            break
    return DesignReport(
        allocation=p,
        objective=phi + log_shift,
        rounds_used=rounds,
        converged=converged,
        support_size=int(np.sum(p > 0)),
        verification=None,
    )


def relative_efficiency(phi1: float, phi2: float, d: int) -> float:
    """exp((phi1 - phi2) / (d + 1)): efficiency of design 1 relative to 2."""
    return math.exp((phi1 - phi2) / (d + 1))


def efficiency_report(spec, X, prior, designs: dict, q: QuadratureConfig,
                      compare: tuple) -> EfficiencyReport:
    """phi of each named design (one frozen sample) and the efficiency of
    designs[compare[0]] relative to designs[compare[1]]."""
    w_norm, log_shift = _normalized_sample_weights(spec, X, prior, q)
    evaluator = _SampleLogDet(X, w_norm)
    phis = {}
    for name, p in designs.items():
        p = np.asarray(p, float)
        if int(np.sum(p > 0)) < spec.n_params:
            phis[name] = -np.inf
            continue
        phis[name] = float(np.mean(evaluator.logf(p))) + log_shift
    d = spec.n_params - 1
    rel = relative_efficiency(phis[compare[0]], phis[compare[1]], d)
    return EfficiencyReport(phi_values=phis, relative_efficiency=rel, d_plus_1=d + 1)
