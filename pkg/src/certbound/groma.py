"""Global categorial robustness: sample points, run local estimates, bound the mean.

The concentration bound covers the outer layer of randomness — the uniform
draw of evaluation points — treating each point's local failure probability
as a [0,1]-bounded variable. Inner-loop estimation error is visible in the
per-point diagnostics instead.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import stats
from .adapters import ModelHandle, classify_batch
from .core import BandReport, DomainSpec, GlobalRobustnessResult, LabeledPoint
from .dataset import Dataset
from .errors import EstimateUnavailableError, InsufficientDataError
from .roma import RomaConfig, roma_local
from .rng import substream

_ELIGIBILITY_BATCH = 1024


@dataclass(frozen=True)
class CategorySample:
    """The points actually certified: correctly classified members of one category."""

    category: int
    points: tuple[LabeledPoint, ...]
    excluded: int
    eligible: int


def select_points(
    dataset: Dataset, category: int, n: int, model: ModelHandle, master_seed: int
) -> CategorySample:
    """Draw n correctly classified category points uniformly without replacement."""
    members = sorted((p for p in dataset.points if p.label == category), key=lambda p: p.id)
    eligible: list[LabeledPoint] = []
    excluded = 0
    for start in range(0, len(members), _ELIGIBILITY_BATCH):
        chunk = members[start : start + _ELIGIBILITY_BATCH]
        confs = classify_batch(model, [p.input for p in chunk])
        for point, conf in zip(chunk, confs):
            if conf.argmax == point.label:
                eligible.append(point)
            else:
                excluded += 1
    if len(eligible) < n:
        raise InsufficientDataError(requested=n, available=len(eligible), category=category)
    rng = substream(master_seed, f"select-points/{category}", 0)
    chosen_idx = rng.choice(len(eligible), size=n, replace=False)
    chosen = sorted((eligible[i] for i in chosen_idx), key=lambda p: p.id)
    return CategorySample(
        category=category, points=tuple(chosen), excluded=excluded, eligible=len(eligible)
    )


def _aggregate_bands(locals_: list) -> tuple[BandReport, ...]:
    banded = [r for r in locals_ if r.bands]
    if not banded:
        return ()
    n_bands = len(banded[0].bands)
    reports = []
    for i in range(n_bands):
        outcomes = [r.bands[i] for r in banded]
        passes = [b for b in outcomes if b.recovered]
        p_mean = (
            math.fsum(b.result.p_fail for b in passes) / len(passes) if passes else 1.0
        )
        reports.append(
            BandReport(
                index=i,
                epsilon_lo=outcomes[0].epsilon_lo,
                epsilon_hi=outcomes[0].epsilon_hi,
                certified=len(passes) == len(outcomes),
                points_pass=len(passes),
                points_total=len(outcomes),
                p_fail_mean=p_mean,
            )
        )
    return tuple(reports)


def groma_global(
    sample: CategorySample,
    model: ModelHandle,
    domain: DomainSpec,
    cfg: RomaConfig,
    alpha: float,
    master_seed: int,
    workers: int = 1,
) -> GlobalRobustnessResult:
    """Average local failure probabilities over the sample and attach the error bound.

    Per-point runs are independent; with several workers they execute
    concurrently, and the aggregation reduces over points in id order, so the
    result is identical for any worker count.
    """
    if not sample.points:
        raise InsufficientDataError(requested=1, available=0, category=sample.category)

    def run(point: LabeledPoint):
        return roma_local(point, model, domain, cfg, master_seed)

    effective = workers if model.concurrency_safe else 1
    try:
        if effective > 1:
            with ThreadPoolExecutor(max_workers=effective) as pool:
                locals_ = list(pool.map(run, sample.points))
        else:
            locals_ = [run(p) for p in sample.points]
    except EstimateUnavailableError:
        n = len(sample.points)
        return GlobalRobustnessResult(
            domain_name=domain.name,
            n=n,
            p_mean=1.0,
            hoeffding_radius=0.0,
            p_upper=1.0,
            normality_failures=n,
            indeterminate=True,
        )

    n = len(locals_)
    p_mean = math.fsum(r.p_fail for r in locals_) / n
    radius = stats.hoeffding_radius(n, alpha)
    return GlobalRobustnessResult(
        domain_name=domain.name,
        n=n,
        p_mean=p_mean,
        hoeffding_radius=radius,
        p_upper=min(1.0, p_mean + radius),
        normality_failures=sum(1 for r in locals_ if r.method.value != "GaussianTail"),
        bands=_aggregate_bands(locals_),
    )
