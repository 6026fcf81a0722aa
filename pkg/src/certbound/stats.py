"""Statistics kernel: normality gate, power transform, tail and concentration bounds.

All operations are pure functions of their arguments and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from .errors import DegenerateSampleError, InsufficientSamplesError

# Critical values for the normality statistic with both parameters estimated,
# after the small-sample adjustment a2 * (1 + 0.75/n + 2.25/n^2). Standard
# reference constants; cross-checked against scipy and statsmodels in the
# test suite before being trusted here.
AD_CRITICAL = {0.05: 0.752, 0.01: 1.035}

AD_MIN_SAMPLES = 8

BOXCOX_SHIFT = 1e-6
BOXCOX_LAMBDA_RANGE = (-5.0, 5.0)
BOXCOX_GRID_POINTS = 21
BOXCOX_TOL = 1e-4


@dataclass(frozen=True)
class NormalFit:
    """Gaussian fit of a sample: mean, sample stdev (ddof=1), and count."""

    mean: float
    stdev: float
    n: int

    def __post_init__(self):
        if self.stdev <= 0:
            raise DegenerateSampleError("stdev must be positive")
        if self.n < 2:
            raise InsufficientSamplesError("a normal fit needs n >= 2")


@dataclass(frozen=True)
class AdReport:
    """Normality test outcome: raw statistic, adjusted statistic, and the gate decision."""

    a2: float
    a2_star: float
    passed: bool
    level: float = 0.05


def fit_normal(samples) -> NormalFit:
    x = np.asarray(samples, dtype=np.float64)
    return NormalFit(mean=float(x.mean()), stdev=float(x.std(ddof=1)), n=int(x.size))


def anderson_darling(samples, level: float = 0.05) -> AdReport:
    """Normality test with estimated mean and variance.

    Computes A^2 = -n - (1/n) * sum_i (2i-1) [ln F(z_(i)) + ln(1 - F(z_(n+1-i)))]
    against the normal fitted to the sample, then applies the small-sample
    adjustment and compares against the tabulated critical value.
    """
    if level not in AD_CRITICAL:
        raise ValueError(f"unsupported significance level {level}; choose from {sorted(AD_CRITICAL)}")
    x = np.asarray(samples, dtype=np.float64)
    n = int(x.size)
    if n < AD_MIN_SAMPLES:
        raise InsufficientSamplesError(f"normality test needs n >= {AD_MIN_SAMPLES}, got {n}")
    s = float(x.std(ddof=1))
    if s <= 0:
        raise DegenerateSampleError("sample has zero variance")
    z = np.sort((x - x.mean()) / s)
    i = np.arange(1, n + 1)
    # log_ndtr(-z) reversed gives ln(1 - F(z_(n+1-i))) without cancellation in the tails
    a2 = float(-n - np.mean((2 * i - 1) * (log_ndtr(z) + log_ndtr(-z[::-1]))))
    a2_star = a2 * (1 + 0.75 / n + 2.25 / n**2)
    return AdReport(a2=a2, a2_star=a2_star, passed=a2_star <= AD_CRITICAL[level], level=level)


@dataclass(frozen=True)
class BoxCoxResult:
    lambda_star: float
    transformed: np.ndarray
    shift: float


def boxcox_transform(x, lam: float):
    """Power transform (x^lam - 1)/lam, with the log limit at lam = 0.

    Evaluated as expm1(lam * ln x)/lam, which stays strictly increasing in x
    even for |lam| far below machine epsilon, where the naive power form
    collapses to zero.
    """
    x = np.asarray(x, dtype=np.float64)
    if lam == 0.0:
        return np.log(x)
    return np.expm1(lam * np.log(x)) / lam


def box_cox(samples) -> BoxCoxResult:
    """Maximum-likelihood power transform over lambda in [-5, 5].

    Samples at or below zero are shifted up by a fixed 1e-6 first (scores are
    probabilities, so only exact zeros occur in practice); the shift is
    recorded so thresholds can be mapped through the same transform. The
    profile log-likelihood is scanned on a coarse grid and refined by
    golden-section search, which is robust to the flat stretches the
    likelihood can have.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 2:
        raise InsufficientSamplesError("power transform needs n >= 2")
    shift = 0.0
    if np.any(x <= 0):
        shift = BOXCOX_SHIFT
        x = x + shift
    if np.any(x <= 0):
        raise DegenerateSampleError("samples must be positive after shift")
    n = x.size
    logx = np.log(x)
    sum_logx = float(logx.sum())

    def llf(lam: float) -> float:
        t = boxcox_transform(x, lam)
        var = float(t.var())
        if var <= 0 or not math.isfinite(var):
            return -math.inf
        return -0.5 * n * math.log(var) + (lam - 1.0) * sum_logx

    lo, hi = BOXCOX_LAMBDA_RANGE
    grid = np.linspace(lo, hi, BOXCOX_GRID_POINTS)
    values = [llf(g) for g in grid]
    best = int(np.argmax(values))
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, len(grid) - 1)]
    lam_star = _golden_section_max(llf, float(a), float(b), BOXCOX_TOL)
    return BoxCoxResult(lambda_star=lam_star, transformed=boxcox_transform(x, lam_star), shift=shift)


def _golden_section_max(f, a: float, b: float, tol: float) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def gaussian_tail(fit: NormalFit, tau: float) -> float:
    """P(X > tau) for X ~ Normal(fit.mean, fit.stdev^2), via the complementary error function."""
    z = (tau - fit.mean) / fit.stdev
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def hoeffding_radius(n: int, alpha: float) -> float:
    """Two-sided concentration half-width sqrt(ln(2/alpha) / (2n)) for [0,1]-valued means."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def hoeffding_sample_size(alpha: float, t: float) -> int:
    """Smallest n with hoeffding_radius(n, alpha) <= t.

    The closed form is ceil(ln(2/alpha) / (2 t^2)); the result is then nudged
    so the inverse property holds exactly in floating point at boundaries.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if not 0.0 < t <= 1.0:
        raise ValueError("radius t must lie in (0, 1]")
    n = max(1, math.ceil(math.log(2.0 / alpha) / (2.0 * t * t)))
    while hoeffding_radius(n, alpha) > t:
        n += 1
    while n > 1 and hoeffding_radius(n - 1, alpha) <= t:
        n -= 1
    return n


def hoeffding_required_n(alpha: float, t: float) -> float:
    """Real-valued n for radius t; used for infeasibility reporting when n overflows practicality."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if t <= 0:
        raise ValueError("radius t must be positive")
    return math.log(2.0 / alpha) / (2.0 * t * t)
