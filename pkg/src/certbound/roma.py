"""Local robustness estimation around a single evaluation point.

The four-step procedure: sample the perturbation neighborhood, extract the
runner-up (highest incorrect) confidence score of each sample, gate the score
distribution through a normality test (with a power-transform retry), then
read the failure probability off the fitted Gaussian tail beyond the
confidence threshold. When normality cannot be recovered the configured
fallback chain takes over: domain narrowing (partial certification per
magnitude band), exhaustive exact counting when the neighborhood is finitely
enumerable, or a Laplace-smoothed empirical fraction as the terminal
assumption-free estimate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import stats
from .adapters import ModelHandle, classify, predict_scores
from .core import (
    ConfidenceVector,
    DomainKind,
    DomainSpec,
    LabeledPoint,
    LocalRobustnessResult,
    Method,
)
from .errors import (
    DegenerateSampleError,
    EstimateUnavailableError,
    InfeasiblePlanError,
    InsufficientSamplesError,
    PointMisclassifiedError,
)
from .perturb import SampleStream, sample_glare, sample_linf_band, sample_scratch
from .rng import SubstreamFactory

MIN_SAMPLES = 8

# Automatic exact-count fallback is honest only where the enumeration measure
# matches the sampling measure: the uniform box, the substitution set, or the
# degenerate identity domain. And a grid coarser than this estimates nothing.
MIN_FALLBACK_GRID = 21

_NARROWABLE = (DomainKind.LINF_UNIFORM, DomainKind.GLARE, DomainKind.SCRATCH)


class Fallback(str, enum.Enum):
    BOX_COX = "BoxCox"
    NARROW_DOMAIN = "NarrowDomain"
    EXACT_COUNT = "ExactCount"
    EMPIRICAL_FRACTION = "EmpiricalFraction"


DEFAULT_FALLBACKS = (Fallback.BOX_COX, Fallback.EXACT_COUNT, Fallback.EMPIRICAL_FRACTION)


@dataclass(frozen=True)
class RomaConfig:
    k: int
    ad_level: float = 0.05
    fallback_order: tuple[Fallback, ...] = DEFAULT_FALLBACKS
    narrow_splits: int = 4
    enumeration_budget: int = 10**7

    def __post_init__(self):
        if self.k < MIN_SAMPLES:
            raise ValueError(f"inner sample count k must be >= {MIN_SAMPLES}, got {self.k}")
        if self.narrow_splits < 2:
            raise ValueError("narrow_splits must be >= 2")


@dataclass(frozen=True)
class BandOutcome:
    """One narrowing band of a point's neighborhood: recovered normality or flagged."""

    index: int
    epsilon_lo: float
    epsilon_hi: float
    recovered: bool
    result: Optional[LocalRobustnessResult]


def extract_score(conf: ConfidenceVector, true_label: int) -> float:
    """Highest incorrect confidence: the max score over classes other than the label."""
    return max(s for i, s in enumerate(conf.scores) if i != true_label)


def runner_up_scores(score_matrix: np.ndarray, true_label: int) -> np.ndarray:
    """Vectorized extract_score over a (B, labels) score matrix."""
    masked = score_matrix.copy()
    masked[:, true_label] = -np.inf
    return masked.max(axis=1)


def _collect_scores(
    point: LabeledPoint, model: ModelHandle, domain: DomainSpec, k: int, master_seed: int
) -> np.ndarray:
    inputs = SampleStream(domain, point, master_seed).draw(k)
    matrix = predict_scores(model, np.stack(inputs))
    return runner_up_scores(matrix, point.label)


def _try_ad(scores: np.ndarray, level: float) -> Optional[stats.AdReport]:
    try:
        return stats.anderson_darling(scores, level)
    except (DegenerateSampleError, InsufficientSamplesError):
        return None


def _gaussian_tail_frac(samples: np.ndarray, tau: float) -> float:
    p = stats.gaussian_tail(stats.fit_normal(samples), tau)
    return min(1.0, max(0.0, p))


def _try_boxcox(
    scores: np.ndarray, tau: float, level: float
) -> tuple[Optional[float], Optional[bool], Optional[float]]:
    """Power-transform retry: returns (lambda, gate passed, p_fail or None)."""
    try:
        bc = stats.box_cox(scores)
        report = stats.anderson_darling(bc.transformed, level)
    except (DegenerateSampleError, InsufficientSamplesError):
        return None, None, None
    if not report.passed:
        return bc.lambda_star, False, None
    # the transform is strictly monotone, so mapping tau through it preserves
    # the tail event {score > tau} exactly
    tau_t = float(stats.boxcox_transform(np.asarray([tau + bc.shift]), bc.lambda_star)[0])
    return bc.lambda_star, True, _gaussian_tail_frac(bc.transformed, tau_t)


def _empirical_fraction(scores: np.ndarray, tau: float) -> float:
    """Laplace-smoothed exceedance fraction; never exactly 0 or 1."""
    return (int((scores > tau).sum()) + 1) / (scores.size + 2)


def _exact_fallback(
    point: LabeledPoint, model: ModelHandle, domain: DomainSpec, budget: int, tau: float
) -> Optional[float]:
    from .oracle import plan_enumeration, exact_count

    if domain.epsilon > 0 and domain.kind not in (
        DomainKind.LINF_UNIFORM,
        DomainKind.CHAR_SUBSTITUTE,
    ):
        return None
    try:
        plan = plan_enumeration(domain, point, budget=budget)
    except InfeasiblePlanError:
        return None
    if plan.grid_per_dim != 0 and plan.grid_per_dim != 1 and plan.grid_per_dim < MIN_FALLBACK_GRID:
        return None
    return exact_count(point, model, plan, tau)


def roma_local(
    point: LabeledPoint,
    model: ModelHandle,
    domain: DomainSpec,
    cfg: RomaConfig,
    master_seed: int,
) -> LocalRobustnessResult:
    """Estimate the local failure probability of one correctly classified point."""
    base = classify(model, point.input)
    if base.argmax != point.label:
        raise PointMisclassifiedError(point.id)

    scores = _collect_scores(point, model, domain, cfg.k, master_seed)
    tau = domain.tau
    ad = _try_ad(scores, cfg.ad_level)
    ad_stat = ad.a2_star if ad is not None else math.inf
    ad_passed = ad.passed if ad is not None else False

    def result(method: Method, p_fail: float, bc_lambda=None, bc_passed=None, bands=()):
        return LocalRobustnessResult(
            point_id=point.id,
            k=cfg.k,
            ad_statistic=ad_stat,
            ad_passed=ad_passed,
            boxcox_lambda=bc_lambda,
            ad_passed_after_boxcox=bc_passed,
            method=method,
            p_fail=p_fail,
            bands=bands,
        )

    if ad_passed:
        return result(Method.GAUSSIAN_TAIL, _gaussian_tail_frac(scores, tau))

    bc_lambda: Optional[float] = None
    bc_passed: Optional[bool] = None
    bands: tuple[BandOutcome, ...] = ()
    for fb in cfg.fallback_order:
        if fb is Fallback.BOX_COX:
            bc_lambda, bc_passed, p = _try_boxcox(scores, tau, cfg.ad_level)
            if p is not None:
                return result(Method.GAUSSIAN_TAIL, p, bc_lambda, bc_passed)
        elif fb is Fallback.NARROW_DOMAIN:
            if domain.kind in _NARROWABLE and domain.epsilon > 0:
                bands = tuple(narrow_domain(point, model, domain, cfg, master_seed))
        elif fb is Fallback.EXACT_COUNT:
            p = _exact_fallback(point, model, domain, cfg.enumeration_budget, tau)
            if p is not None:
                return result(Method.EXACT_COUNT, p, bc_lambda, bc_passed, bands)
        elif fb is Fallback.EMPIRICAL_FRACTION:
            p = _empirical_fraction(scores, tau)
            return result(Method.EMPIRICAL_FRACTION, p, bc_lambda, bc_passed, bands)
    raise EstimateUnavailableError(
        point.id, f"fallbacks {[f.value for f in cfg.fallback_order]} exhausted"
    )


def _band_samples(
    point: LabeledPoint,
    domain: DomainSpec,
    eps_lo: float,
    eps_hi: float,
    k: int,
    master_seed: int,
) -> list[np.ndarray]:
    draws = []
    factory = SubstreamFactory()
    for j in range(k):
        rng = factory.at(master_seed, point.id, j)
        if domain.kind is DomainKind.LINF_UNIFORM:
            draws.append(sample_linf_band(point.input, eps_lo, eps_hi, rng))
        elif domain.kind is DomainKind.GLARE:
            eps = rng.uniform(eps_lo, eps_hi)
            draws.append(sample_glare(point.input, eps, rng, point.shape))
        elif domain.kind is DomainKind.SCRATCH:
            eps = rng.uniform(eps_lo, eps_hi)
            draws.append(sample_scratch(point.input, eps, rng, point.shape))
        else:
            raise ValueError(f"domain kind {domain.kind} does not support narrowing")
    return draws


def narrow_domain(
    point: LabeledPoint,
    model: ModelHandle,
    domain: DomainSpec,
    cfg: RomaConfig,
    master_seed: int,
) -> list[BandOutcome]:
    """Partition [0, epsilon] into equal magnitude bands and re-test each one.

    Bands where the normality gate passes (raw or after the power transform)
    get a Gaussian-tail result; the rest are flagged so certificates can name
    the uncertified sub-domains explicitly. Bands are diagnostics for partial
    certification; they do not feed the full-domain estimate.
    """
    if domain.kind is DomainKind.CHAR_SUBSTITUTE:
        raise ValueError("narrowing applies to continuous domains only")
    edges = np.linspace(0.0, domain.epsilon, cfg.narrow_splits + 1)
    outcomes = []
    for i in range(cfg.narrow_splits):
        eps_lo, eps_hi = float(edges[i]), float(edges[i + 1])
        draws = _band_samples(point, domain, eps_lo, eps_hi, cfg.k, master_seed)
        scores = runner_up_scores(predict_scores(model, np.stack(draws)), point.label)
        ad = _try_ad(scores, cfg.ad_level)
        bc_lambda: Optional[float] = None
        bc_passed: Optional[bool] = None
        p_fail: Optional[float] = None
        if ad is not None and ad.passed:
            p_fail = _gaussian_tail_frac(scores, domain.tau)
        else:
            bc_lambda, bc_passed, p_fail = _try_boxcox(scores, domain.tau, cfg.ad_level)
        recovered = p_fail is not None
        result = None
        if recovered:
            result = LocalRobustnessResult(
                point_id=point.id,
                k=cfg.k,
                ad_statistic=ad.a2_star if ad is not None else math.inf,
                ad_passed=bool(ad is not None and ad.passed),
                boxcox_lambda=bc_lambda,
                ad_passed_after_boxcox=bc_passed,
                method=Method.GAUSSIAN_TAIL,
                p_fail=p_fail,
            )
        outcomes.append(
            BandOutcome(index=i, epsilon_lo=eps_lo, epsilon_hi=eps_hi,
                        recovered=recovered, result=result)
        )
    return outcomes
