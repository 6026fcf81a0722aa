"""End-to-end certification: Stage Two execution, certificate emission, re-checks.

A certification run is a deterministic function of (spec bytes, model digest,
dataset bytes): re-running it reproduces the certificate's content hash byte
for byte, which is what makes an issued certificate falsifiable — a re-test
either confirms it or defeats it.
"""

from __future__ import annotations

import dataclasses
import enum
import math
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Optional

from . import __version__
from .adapters import ModelHandle
from .budget import aggregate, verdict
from .core import (
    CERTIFICATE_VERSION,
    Certificate,
    NormativeSpec,
    Verdict,
    canonical_serialize,
    certificate_content_hash,
    load_certificate,
    spec_hash,
    verify_certificate_hash,
)
from .dataset import Dataset
from .errors import CertboundError, CertificateTamperError
from .groma import groma_global, select_points
from .roma import RomaConfig
from .stats import hoeffding_required_n, hoeffding_sample_size


def default_config(spec: NormativeSpec, **overrides) -> RomaConfig:
    return RomaConfig(k=spec.samples_per_point, **overrides)


def run_certification(
    spec: NormativeSpec,
    model: ModelHandle,
    dataset: Dataset,
    cfg: Optional[RomaConfig] = None,
    workers: int = 1,
) -> Certificate:
    """Execute every domain, fold the budget, and assemble the hash-anchored certificate."""
    cfg = cfg or default_config(spec)
    sample = select_points(dataset, spec.category, spec.points_per_category, model, spec.seed)
    results = [
        groma_global(sample, model, domain, cfg, spec.alpha, spec.seed, workers=workers)
        for domain in spec.domains
    ]
    ledger = aggregate(results, spec)
    v = verdict(ledger, any(r.indeterminate for r in results))
    cert = Certificate(
        version=CERTIFICATE_VERSION,
        spec_hash=spec_hash(spec),
        model_hash=model.model_digest,
        dataset_hash=dataset.digest,
        eligible_points=sample.eligible,
        excluded_points=sample.excluded,
        per_domain=tuple(results),
        ledger=ledger,
        p_total=ledger.p_total,
        verdict=v,
        seed=spec.seed,
        tool_version=__version__,
        issued_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        content_hash="",
    )
    return dataclasses.replace(cert, content_hash=certificate_content_hash(cert))


def write_certificate(cert: Certificate, path: str) -> None:
    """Write atomically: temp file, verify what landed on disk, then rename."""
    blob = canonical_serialize(cert)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".cert-", suffix=".json")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        written = load_certificate(tmp)
        if not verify_certificate_hash(written):
            raise CertboundError("certificate failed hash verification after write")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class RecheckOutcome(str, enum.Enum):
    CONFIRMED = "Confirmed"
    DEFEATED = "Defeated"
    INVALID = "Invalid"


@dataclass(frozen=True)
class RecheckReport:
    outcome: RecheckOutcome
    mode: str  # "recorded-seed" or "fresh-seed"
    detail: str
    original_hash: str
    fresh_hash: Optional[str] = None
    original_verdict: Optional[Verdict] = None
    fresh_verdict: Optional[Verdict] = None

    def to_doc(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "mode": self.mode,
            "detail": self.detail,
            "original_hash": self.original_hash,
            "fresh_hash": self.fresh_hash,
            "original_verdict": self.original_verdict.value if self.original_verdict else None,
            "fresh_verdict": self.fresh_verdict.value if self.fresh_verdict else None,
        }


def recheck(
    cert: Certificate,
    spec: NormativeSpec,
    model: ModelHandle,
    dataset: Dataset,
    cfg: Optional[RomaConfig] = None,
    workers: int = 1,
    fresh_seed: Optional[int] = None,
) -> RecheckReport:
    """Re-test an issued certificate against the same thresholds and domains.

    Recorded-seed mode demands exact reproduction (byte-identical content
    hash); fresh-seed mode is an independent statistical re-test and compares
    verdicts. Any mismatch of the certified configuration (spec, model, or
    dataset digest) is Invalid rather than Defeated: the re-test would not be
    of the same certified system.
    """
    if not verify_certificate_hash(cert):
        raise CertificateTamperError(
            f"certificate content_hash {cert.content_hash} does not verify"
        )

    def invalid(what: str, expected: str, got: str) -> RecheckReport:
        return RecheckReport(
            outcome=RecheckOutcome.INVALID,
            mode=mode,
            detail=f"{what} mismatch: certificate has {expected}, re-test setup has {got}",
            original_hash=cert.content_hash,
            original_verdict=cert.verdict,
        )

    mode = "fresh-seed" if fresh_seed is not None else "recorded-seed"
    current_spec_hash = spec_hash(spec)
    if cert.spec_hash != current_spec_hash:
        return invalid("spec_hash", cert.spec_hash, current_spec_hash)
    if cert.model_hash != model.model_digest:
        return invalid("model digest", cert.model_hash, model.model_digest)
    if cert.dataset_hash != dataset.digest:
        return invalid("dataset digest", cert.dataset_hash, dataset.digest)

    if fresh_seed is not None:
        spec = dataclasses.replace(spec, seed=fresh_seed)
    fresh = run_certification(spec, model, dataset, cfg=cfg, workers=workers)

    if fresh_seed is None:
        confirmed = fresh.content_hash == cert.content_hash
        detail = (
            "re-run reproduced the certificate byte for byte"
            if confirmed
            else "re-run produced a different content hash on the recorded seed"
        )
    else:
        confirmed = fresh.verdict == cert.verdict
        detail = (
            f"independent re-test with seed {fresh_seed} reached the same verdict"
            if confirmed
            else f"independent re-test with seed {fresh_seed} reached {fresh.verdict.value}, "
            f"certificate says {cert.verdict.value}"
        )
    return RecheckReport(
        outcome=RecheckOutcome.CONFIRMED if confirmed else RecheckOutcome.DEFEATED,
        mode=mode,
        detail=detail,
        original_hash=cert.content_hash,
        fresh_hash=fresh.content_hash,
        original_verdict=cert.verdict,
        fresh_verdict=fresh.verdict,
    )


DEFAULT_FEASIBILITY_CEILING = 1e12


@dataclass(frozen=True)
class DomainSampleSize:
    domain_name: str
    margin: float
    required_n: float
    feasible: bool
    sufficient: Optional[bool]  # None when infeasible at any scale

    def to_doc(self) -> dict:
        return {
            "domain_name": self.domain_name,
            "margin": self.margin,
            "required_n": self.required_n,
            "feasible": self.feasible,
            "sufficient": self.sufficient,
        }


@dataclass(frozen=True)
class SampleSizePlan:
    alpha: float
    points_per_category: int
    ceiling: float
    domains: tuple[DomainSampleSize, ...]

    @property
    def any_infeasible(self) -> bool:
        return any(not d.feasible for d in self.domains)

    def to_doc(self) -> dict:
        return {
            "alpha": self.alpha,
            "points_per_category": self.points_per_category,
            "ceiling": self.ceiling,
            "domains": [d.to_doc() for d in self.domains],
            "any_infeasible": self.any_infeasible,
        }


def plan_sample_size(
    spec: NormativeSpec,
    headroom: float = 0.0,
    ceiling: float = DEFAULT_FEASIBILITY_CEILING,
) -> SampleSizePlan:
    """Pre-compute per-domain point counts needed for the error bound to fit the sub-budget.

    The margin a domain's bound must squeeze under is its sub-budget minus the
    expected estimate headroom; the required n follows in closed form. Domains
    whose required n exceeds the feasibility ceiling are flagged as
    statistically infeasible at desk scale instead of being attempted.
    """
    reports = []
    for d in spec.domains:
        margin = max(0.0, d.sub_delta - headroom)
        if margin <= 0.0:
            reports.append(
                DomainSampleSize(d.name, margin, math.inf, feasible=False, sufficient=None)
            )
            continue
        required = hoeffding_required_n(spec.alpha, margin)
        feasible = required <= ceiling
        sufficient = None
        if feasible:
            sufficient = spec.points_per_category >= hoeffding_sample_size(spec.alpha, margin)
        reports.append(DomainSampleSize(d.name, margin, required, feasible, sufficient))
    return SampleSizePlan(
        alpha=spec.alpha,
        points_per_category=spec.points_per_category,
        ceiling=ceiling,
        domains=tuple(reports),
    )
