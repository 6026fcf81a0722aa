"""Exposure-weighted risk budgeting and the systemic verdict.

The aggregate risk is the exposure-weighted sum of per-domain upper bounds,
summed exactly (error-free transformation via math.fsum) in sorted domain
order so the certified number never depends on accumulation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import GlobalRobustnessResult, NormativeSpec, Verdict
from .errors import DomainMismatchError


@dataclass(frozen=True)
class BudgetEntry:
    domain_name: str
    omega: float
    sub_delta: float
    p_upper: float
    within_sub_budget: bool


@dataclass(frozen=True)
class BudgetLedger:
    entries: tuple[BudgetEntry, ...]
    p_total: float
    delta: float
    feasible: bool

    def to_doc(self) -> dict:
        return {
            "entries": [
                {
                    "domain_name": e.domain_name,
                    "omega": e.omega,
                    "sub_delta": e.sub_delta,
                    "p_upper": e.p_upper,
                    "within_sub_budget": e.within_sub_budget,
                }
                for e in self.entries
            ],
            "p_total": self.p_total,
            "delta": self.delta,
            "feasible": self.feasible,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "BudgetLedger":
        return cls(
            entries=tuple(
                BudgetEntry(
                    domain_name=str(e["domain_name"]),
                    omega=float(e["omega"]),
                    sub_delta=float(e["sub_delta"]),
                    p_upper=float(e["p_upper"]),
                    within_sub_budget=bool(e["within_sub_budget"]),
                )
                for e in doc["entries"]
            ),
            p_total=float(doc["p_total"]),
            delta=float(doc["delta"]),
            feasible=bool(doc["feasible"]),
        )


def aggregate(results: list[GlobalRobustnessResult], spec: NormativeSpec) -> BudgetLedger:
    """Fold per-domain upper bounds into the exposure-weighted total."""
    by_name = {r.domain_name: r for r in results}
    spec_names = [d.name for d in spec.domains]
    if sorted(by_name) != sorted(spec_names) or len(results) != len(spec_names):
        raise DomainMismatchError(
            f"results for {sorted(by_name)} do not match spec domains {sorted(spec_names)}"
        )
    domains = {d.name: d for d in spec.domains}
    entries = []
    for name in sorted(spec_names):
        d = domains[name]
        r = by_name[name]
        entries.append(
            BudgetEntry(
                domain_name=name,
                omega=d.omega,
                sub_delta=d.sub_delta,
                p_upper=r.p_upper,
                within_sub_budget=r.p_upper <= d.sub_delta,
            )
        )
    p_total = math.fsum(e.omega * e.p_upper for e in entries)
    feasible = math.fsum(d.omega * d.sub_delta for d in spec.domains) <= spec.delta
    return BudgetLedger(entries=tuple(entries), p_total=p_total, delta=spec.delta, feasible=feasible)


def verdict(ledger: BudgetLedger, any_indeterminate: bool) -> Verdict:
    """Certified iff the aggregate stays within delta; indeterminate domains dominate.

    A sub-budget overshoot alone does not reject: the systemic constraint is
    on the aggregate, and the ledger flags per-mode overshoots for auditors.
    """
    if any_indeterminate:
        return Verdict.INDETERMINATE
    if ledger.p_total <= ledger.delta:
        return Verdict.CERTIFIED
    return Verdict.REJECTED
