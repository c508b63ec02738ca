"""Two-level factorial model: design matrix construction and GLM weights.

The canonical design matrix has one row per level combination of the ``k``
two-level factors.  Row ``i`` (1-indexed) encodes the levels by writing
``i - 1`` as a k-bit binary number with factor 1 in the most significant
bit; bit 0 maps to level +1 and bit 1 to level -1.  Row 1 is therefore
(+1, ..., +1) and row 2^k is (-1, ..., -1).  Columns follow the order of
the model effects, intercept first; the column of an interaction is the
entrywise product of the participating main-effect columns.

For a binary response the information carried by one observation at linear
predictor eta is ``nu(eta) = (dpi/deta)^2 / (pi (1 - pi))`` where
``pi = g^{-1}(eta)`` for link ``g``.  Closed forms used here:

    logit:    nu(eta) = 1 / (2 + e^eta + e^-eta) = e^-|eta| / (1 + e^-|eta|)^2
    probit:   nu(eta) = phi(eta)^2 / (Phi(eta) Phi(-eta)), computed in
              log space via log_ndtr so the tails do not lose precision
    cloglog:  pi = 1 - exp(-e^eta),  nu(eta) = u^2 / (e^u - 1), u = e^eta
    loglog:   pi = exp(-e^-eta),     nu(eta) = nu_cloglog(-eta)

Underflow behaviour (measured in IEEE double): logit stays positive for
|eta| <= 700; probit underflows to 0 past |eta| ~ 38.6 (the true value drops
below the smallest subnormal); cloglog underflows past eta ~ +6.6 on the
right (its true decay is doubly exponential, exp(2 eta - e^eta)) while the
left tail stays positive to eta ~ -740; loglog mirrors cloglog.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr

from .errors import ValidationError

LINKS = ("logit", "probit", "loglog", "cloglog")

# Location of the interior maximum of nu per link.  The cloglog value solves
# 2/u = 1 + e^-u/(1 - e^-u) with u = e^eta; loglog is its mirror image.
_CLOGLOG_PEAK = 0.4660108385085172
NU_PEAK = {
    "logit": 0.0,
    "probit": 0.0,
    "cloglog": _CLOGLOG_PEAK,
    "loglog": -_CLOGLOG_PEAK,
}


@dataclass(frozen=True)
class ModelSpec:
    """Model for a 2^k experiment: effect list (intercept first) and link.

    ``effects`` is an ordered tuple of factor-index tuples; the empty tuple
    is the intercept.  Factor indices are 1-based.
    """

    k: int
    effects: tuple = field(default=None)
    link: str = "logit"

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ValidationError(f"k must be a positive integer, got {self.k!r}")
        if self.effects is None:
            object.__setattr__(self, "effects", main_effects(self.k))
        effects = tuple(tuple(sorted(e)) for e in self.effects)
        object.__setattr__(self, "effects", effects)
        if len(effects) == 0 or effects[0] != ():
            raise ValidationError("effects must list the intercept () first")
        if len(set(effects)) != len(effects):
            raise ValidationError("duplicate effects in model")
        if len(effects) > 2**self.k:
            raise ValidationError("more effects than design points")
        for e in effects:
            for j in e:
                if not (1 <= j <= self.k):
                    raise ValidationError(f"factor index {j} outside 1..{self.k}")
            if len(set(e)) != len(e):
                raise ValidationError(f"repeated factor in effect {e}")
        if self.link not in LINKS:
            raise ValidationError(f"unknown link {self.link!r}; choose from {LINKS}")

    @property
    def n_points(self) -> int:
        return 2**self.k

    @property
    def n_params(self) -> int:
        """d + 1, the number of regression coefficients."""
        return len(self.effects)


def main_effects(k: int, link: str = "logit") -> tuple:
    """Effect list of the main-effects model: intercept plus k main effects."""
    return ((),) + tuple((j,) for j in range(1, k + 1))


def level_matrix(k: int) -> np.ndarray:
    """2^k x k matrix of factor levels in canonical row order."""
    idx = np.arange(2**k)[:, None]
    bits = (idx >> (k - 1 - np.arange(k))) & 1
    return 1.0 - 2.0 * bits


def build_design_matrix(spec: ModelSpec) -> np.ndarray:
    """Canonical 2^k x (d+1) model matrix with entries in {-1, +1}."""
    lv = level_matrix(spec.k)
    cols = []
    for e in spec.effects:
        c = np.ones(2**spec.k)
        for j in e:
            c = c * lv[:, j - 1]
        cols.append(c)
    return np.column_stack(cols)


def _nu_logit(eta):
    t = np.exp(-np.abs(eta))
    return t / (1.0 + t) ** 2


def _nu_probit(eta):
    log_phi = -0.5 * eta * eta - 0.5 * np.log(2.0 * np.pi)
    return np.exp(2.0 * log_phi - log_ndtr(eta) - log_ndtr(-eta))


def _nu_cloglog(eta):
    u = np.exp(np.minimum(eta, 700.0))
    u_lo = np.minimum(u, 34.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        # u / (expm1(u)/u) is exact for tiny u (ratio rounds to 1) and fine
        # up to u ~ 33; beyond that switch to the log-space form.
        ratio = np.where(u_lo > 0, np.expm1(u_lo) / np.where(u_lo > 0, u_lo, 1.0), np.inf)
        small = u_lo / ratio
        big = np.exp(2.0 * np.asarray(eta, float) - u + np.log1p(-np.exp(-np.minimum(u, 700.0))))
    return np.where(u <= 33.0, small, big)


_NU = {
    "logit": _nu_logit,
    "probit": _nu_probit,
    "cloglog": _nu_cloglog,
    "loglog": lambda eta: _nu_cloglog(-np.asarray(eta, float)),
}


def nu(link: str, eta):
    """GLM information weight nu(eta) >= 0 for the given link.

    Accepts scalars or arrays; total on finite input.
    """
    if link not in _NU:
        raise ValidationError(f"unknown link {link!r}")
    eta = np.asarray(eta, dtype=float)
    out = _NU[link](eta)
    return float(out) if out.ndim == 0 else out


def weights(spec: ModelSpec, X: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Per-design-point weights w_i = nu(x_i' beta)."""
    beta = np.asarray(beta, dtype=float)
    if X.shape != (spec.n_points, spec.n_params):
        raise ValidationError(
            f"design matrix shape {X.shape} does not match spec "
            f"({spec.n_points} x {spec.n_params})"
        )
    if beta.shape != (spec.n_params,):
        raise ValidationError(
            f"beta has length {beta.shape}, expected {spec.n_params}"
        )
    if not np.all(np.isfinite(beta)):
        raise ValidationError("beta entries must be finite")
    return nu(spec.link, X @ beta)


def weight_range(spec: ModelSpec, beta_boxes) -> tuple:
    """Range (a, b) of nu over all rows and all beta in the given boxes.

    ``beta_boxes`` is one (lo, hi) interval per coefficient.  For each row
    the linear predictor ranges over an interval computed by interval
    arithmetic; nu is unimodal for every supported link, so its extremes on
    an interval sit at the endpoints or at the interior peak.
    """
    boxes = [(float(lo), float(hi)) for lo, hi in beta_boxes]
    if len(boxes) != spec.n_params:
        raise ValidationError(
            f"{len(boxes)} intervals supplied for {spec.n_params} coefficients"
        )
    for lo, hi in boxes:
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValidationError("interval endpoints must be finite")
        if lo > hi:
            raise ValidationError(f"empty interval ({lo}, {hi})")
    X = build_design_matrix(spec)
    peak = NU_PEAK[spec.link]
    lo_all = np.inf
    hi_all = -np.inf
    for row in X:
        l = sum(min(c * lo, c * hi) for c, (lo, hi) in zip(row, boxes))
        u = sum(max(c * lo, c * hi) for c, (lo, hi) in zip(row, boxes))
        cand = [nu(spec.link, l), nu(spec.link, u)]
        if l <= peak <= u:
            cand.append(nu(spec.link, peak))
        lo_all = min(lo_all, min(cand))
        hi_all = max(hi_all, max(cand))
    return lo_all, hi_all
