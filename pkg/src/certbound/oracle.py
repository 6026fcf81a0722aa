"""Exhaustive exact counting over finitely enumerable perturbation sets.

A grid over the epsilon-box (continuous domains) or the full substitution set
(character domains) is classified input by input; the returned failure
fraction is exact over the enumerated set and carries no randomness. Grid
enumeration discretizes a continuous neighborhood, so reports always carry
the grid so readers can judge the discretization error themselves.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .adapters import ModelHandle, predict_scores
from .core import DomainKind, DomainSpec, LabeledPoint
from .errors import InfeasiblePlanError

DEFAULT_BUDGET = 10**7
DEFAULT_GRID = 201
_BATCH = 8192

_GRID_KINDS = (DomainKind.LINF_UNIFORM, DomainKind.GAUSSIAN, DomainKind.THERMAL)


@dataclass(frozen=True)
class EnumerationPlan:
    domain: DomainSpec
    grid_per_dim: int
    total: int
    budget: int = DEFAULT_BUDGET


def _char_candidate_counts(point: LabeledPoint) -> list[int]:
    from .perturb import _LOWERCASE

    codes = point.input.astype(np.int64)
    return [int((_LOWERCASE != c).sum()) for c in codes]


def _char_total(point: LabeledPoint, max_subs: int) -> int:
    """Number of variants with 1..max_subs substituted positions.

    Computed as partial sums of elementary symmetric polynomials over the
    per-position candidate counts, via the product expansion of
    prod_i (1 + c_i x); exact integer arithmetic throughout.
    """
    counts = _char_candidate_counts(point)
    coeffs = [1]
    for c in counts:
        nxt = coeffs + [0]
        for m in range(len(coeffs)):
            nxt[m + 1] += coeffs[m] * c
        coeffs = nxt
    return sum(coeffs[1 : max_subs + 1])


def plan_enumeration(
    domain: DomainSpec,
    point: LabeledPoint,
    budget: int = DEFAULT_BUDGET,
    grid_per_dim: Optional[int] = None,
) -> EnumerationPlan:
    """Build (and feasibility-check) an enumeration plan for one (domain, point) pair."""
    if domain.epsilon == 0.0:
        return EnumerationPlan(domain=domain, grid_per_dim=1, total=1, budget=budget)
    if domain.kind is DomainKind.CHAR_SUBSTITUTE:
        max_subs = min(int(domain.epsilon), point.input.size)
        total = _char_total(point, max_subs)
        if total > budget:
            raise InfeasiblePlanError(total, budget)
        return EnumerationPlan(domain=domain, grid_per_dim=0, total=total, budget=budget)
    if domain.kind not in _GRID_KINDS:
        raise InfeasiblePlanError(budget + 1, budget)  # no finite parameterization to grid
    d = point.input.size
    if grid_per_dim is None:
        g = DEFAULT_GRID
        while g >= 2 and g**d > budget:
            g = int(budget ** (1.0 / d))
        grid_per_dim = g
    if grid_per_dim < 2:
        raise InfeasiblePlanError(2**d, budget)
    total = grid_per_dim**d
    if total > budget:
        raise InfeasiblePlanError(total, budget)
    return EnumerationPlan(domain=domain, grid_per_dim=grid_per_dim, total=total, budget=budget)


def _iter_grid(point: LabeledPoint, epsilon: float, g: int) -> Iterator[np.ndarray]:
    base = point.input
    d = base.size
    axes = np.stack([np.linspace(b - epsilon, b + epsilon, g) for b in base])
    total = g**d
    for start in range(0, total, _BATCH):
        idx = np.arange(start, min(start + _BATCH, total), dtype=np.int64)
        rows = np.empty((idx.size, d), dtype=np.float64)
        rem = idx.copy()
        for j in range(d - 1, -1, -1):
            rows[:, j] = axes[j][rem % g]
            rem //= g
        yield np.clip(rows, 0.0, 1.0)


def _iter_char_variants(point: LabeledPoint, max_subs: int) -> Iterator[np.ndarray]:
    from .perturb import _LOWERCASE

    codes = point.input.astype(np.int64)
    candidates = [_LOWERCASE[_LOWERCASE != c] for c in codes]
    chunk: list[np.ndarray] = []
    for m in range(1, max_subs + 1):
        for positions in itertools.combinations(range(codes.size), m):
            for letters in itertools.product(*(candidates[p] for p in positions)):
                row = codes.copy()
                for p, letter in zip(positions, letters):
                    row[p] = letter
                chunk.append(row.astype(np.float64))
                if len(chunk) >= _BATCH:
                    yield np.stack(chunk)
                    chunk = []
    if chunk:
        yield np.stack(chunk)


def exact_count(point: LabeledPoint, model: ModelHandle, plan: EnumerationPlan, tau: float) -> float:
    """True failure fraction over the plan's enumerated set: #(runner-up score > tau) / total."""
    from .roma import runner_up_scores

    if plan.total > plan.budget:
        raise InfeasiblePlanError(plan.total, plan.budget)
    domain = plan.domain
    if domain.epsilon == 0.0:
        batches: Iterator[np.ndarray] = iter([point.input[np.newaxis, :]])
    elif domain.kind is DomainKind.CHAR_SUBSTITUTE:
        batches = _iter_char_variants(point, min(int(domain.epsilon), point.input.size))
    else:
        batches = _iter_grid(point, domain.epsilon, plan.grid_per_dim)
    failures = 0
    seen = 0
    for rows in batches:
        scores = runner_up_scores(predict_scores(model, rows), point.label)
        failures += int((scores > tau).sum())
        seen += rows.shape[0]
    assert seen == plan.total, f"enumerated {seen} inputs, planned {plan.total}"
    return failures / plan.total


@dataclass(frozen=True)
class OracleReport:
    p_roma: float
    p_exact: float
    abs_error: float
    total: int
    grid: int

    def to_doc(self) -> dict:
        return {
            "p_roma": self.p_roma,
            "p_exact": self.p_exact,
            "abs_error": self.abs_error,
            "total": self.total,
            "grid": self.grid,
        }


def oracle_compare(
    point: LabeledPoint,
    model: ModelHandle,
    domain: DomainSpec,
    cfg,
    plan: EnumerationPlan,
    master_seed: int,
) -> OracleReport:
    """Run the statistical estimator and the exhaustive count on identical inputs."""
    from .roma import roma_local

    local = roma_local(point, model, domain, cfg, master_seed)
    p_exact = exact_count(point, model, plan, domain.tau)
    return OracleReport(
        p_roma=local.p_fail,
        p_exact=p_exact,
        abs_error=abs(local.p_fail - p_exact),
        total=plan.total,
        grid=plan.grid_per_dim,
    )
