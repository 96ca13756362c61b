"""Moment-matching fits of (asymmetric) generalized Gaussian distributions."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateFitError

logger = logging.getLogger(__name__)

SHAPE_MIN = 0.05
SHAPE_MAX = 10.0
SHAPE_TOL = 1e-4
MIN_SAMPLES = 100
ENTROPY_BINS = 255


@dataclass(frozen=True)
class GgdFit:
    alpha: float
    sigma2: float
    clamped: bool = False

    def as_features(self) -> tuple[float, float]:
        return self.alpha, self.sigma2


@dataclass(frozen=True)
class AggdFit:
    nu: float
    eta: float
    sigma_l2: float
    sigma_r2: float
    clamped: bool = False

    def as_features(self) -> tuple[float, float, float, float]:
        return self.nu, self.eta, self.sigma_l2, self.sigma_r2


@dataclass(frozen=True)
class EntropyDiagnostic:
    h_empirical: float
    delta_h: float
    ratio: float


def shape_ratio(alpha):
    """Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a)); strictly increasing in a."""
    a = np.asarray(alpha, dtype=np.float64)
    return np.exp(2.0 * gammaln(2.0 / a) - gammaln(1.0 / a) - gammaln(3.0 / a))


_RHO_MIN = float(shape_ratio(SHAPE_MIN))
_RHO_MAX = float(shape_ratio(SHAPE_MAX))


def invert_shape_ratio(rho: float) -> tuple[float, bool]:
    """Solve shape_ratio(a) = rho by bisection; returns (a, clamped)."""
    if not np.isfinite(rho):
        raise DegenerateFitError(f"non-finite moment ratio {rho}")
    if rho <= _RHO_MIN:
        return SHAPE_MIN, True
    if rho >= _RHO_MAX:
        return SHAPE_MAX, True
    lo, hi = SHAPE_MIN, SHAPE_MAX
    while hi - lo > SHAPE_TOL:
        mid = 0.5 * (lo + hi)
        if shape_ratio(mid) < rho:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), False


def _flat(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < MIN_SAMPLES:
        raise DegenerateFitError(f"need at least {MIN_SAMPLES} samples, got {x.size}")
    return x


def ggd_from_moments(n, sum_abs, sum_sq) -> GgdFit:
    if n < MIN_SAMPLES:
        raise DegenerateFitError(f"need at least {MIN_SAMPLES} samples, got {int(n)}")
    if not sum_sq > 0.0:
        raise DegenerateFitError("GGD fit of all-zero samples")
    mean_abs = sum_abs / n
    mean_sq = sum_sq / n
    alpha, clamped = invert_shape_ratio(mean_abs * mean_abs / mean_sq)
    if clamped:
        logger.debug("GGD shape clamped to %g", alpha)
    return GgdFit(alpha, float(mean_sq), clamped)


def aggd_from_moments(n_neg, sumsq_neg, n_pos, sumsq_pos, sum_abs) -> AggdFit:
    """AGGD fit from one-sided second moments (x < 0 left, x >= 0 right)."""
    n = n_neg + n_pos
    if n < MIN_SAMPLES:
        raise DegenerateFitError(f"need at least {MIN_SAMPLES} samples, got {int(n)}")
    if n_neg == 0 or n_pos == 0:
        raise DegenerateFitError("AGGD fit needs samples on both sides of zero")
    if not (sumsq_neg > 0.0 and sumsq_pos > 0.0):
        raise DegenerateFitError("AGGD side with zero energy")
    sigma_l2 = sumsq_neg / n_neg
    sigma_r2 = sumsq_pos / n_pos
    bl, br = np.sqrt(sigma_l2), np.sqrt(sigma_r2)
    g = bl / br
    mean_abs = sum_abs / n
    r_hat = mean_abs * mean_abs / ((sumsq_neg + sumsq_pos) / n)
    big_r = r_hat * (g**3 + 1.0) * (g + 1.0) / (g * g + 1.0) ** 2
    nu, clamped = invert_shape_ratio(big_r)
    # side standard deviations -> AGGD scale parameters, then the mean
    to_scale = np.exp(0.5 * (gammaln(1.0 / nu) - gammaln(3.0 / nu)))
    eta = (br - bl) * to_scale * np.exp(gammaln(2.0 / nu) - gammaln(1.0 / nu))
    return AggdFit(nu, float(eta), float(sigma_l2), float(sigma_r2), clamped)


def fit_ggd(samples) -> GgdFit:
    """Shape by bisection on the moment ratio; sigma2 is mean(x^2)."""
    x = _flat(samples)
    if x.min() == x.max():
        raise DegenerateFitError("GGD fit of constant samples")
    return ggd_from_moments(x.size, float(np.sum(np.abs(x))), float(np.sum(x * x)))


def fit_aggd(samples) -> AggdFit:
    x = _flat(samples)
    neg = x < 0
    n_neg = int(np.count_nonzero(neg))
    sq = x * x
    sumsq_neg = float(np.sum(sq[neg]))
    sumsq_pos = float(np.sum(sq[~neg]))
    return aggd_from_moments(n_neg, sumsq_neg, x.size - n_neg, sumsq_pos, float(np.sum(np.abs(x))))


def ggd_entropy(alpha: float, sigma2: float) -> float:
    """Differential entropy (nats) of a zero-mean GGD with variance sigma2."""
    log_beta = 0.5 * (np.log(sigma2) + gammaln(1.0 / alpha) - gammaln(3.0 / alpha))
    return float(1.0 / alpha - np.log(alpha / 2.0) + log_beta + gammaln(1.0 / alpha))


def histogram_entropy(x: np.ndarray, bins=ENTROPY_BINS) -> float:
    lo, hi = float(x.min()), float(x.max())
    if not hi > lo:
        raise DegenerateFitError("degenerate histogram")
    counts, _ = np.histogram(x, bins=bins, range=(lo, hi))
    p = counts[counts > 0] / x.size
    return float(-np.sum(p * np.log(p)) + np.log((hi - lo) / bins))


def entropy_ratio(samples, fit: GgdFit | None = None) -> EntropyDiagnostic:
    """Relative entropy gap between a GGD fit and the empirical histogram.

    Samples are standardized by the fitted variance first, which makes the
    ratio independent of the coefficient scale.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 1000:
        raise DegenerateFitError("entropy diagnostic needs at least 1000 samples")
    if fit is None:
        fit = fit_ggd(x)
    z = x / np.sqrt(fit.sigma2)
    h_emp = histogram_entropy(z)
    h_model = ggd_entropy(fit.alpha, 1.0)
    delta = abs(h_model - h_emp)
    if h_emp == 0.0:
        raise DegenerateFitError("zero empirical entropy")
    return EntropyDiagnostic(h_emp, delta, delta / abs(h_emp))
