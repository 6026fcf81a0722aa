"""Shared domain types, canonical serialization, and content hashing.

Canonical form is the audit primitive of the whole toolkit: a normative spec
or certificate serializes to one fixed byte sequence (fixed field order, no
insignificant whitespace, shortest round-trip decimals), so equal values hash
equally on every platform and a re-issued run can be compared byte for byte.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .errors import SerializationError, SpecValidationError


class DomainKind(str, enum.Enum):
    LINF_UNIFORM = "LinfUniform"
    GAUSSIAN = "Gaussian"
    GLARE = "Glare"
    SCRATCH = "Scratch"
    THERMAL = "Thermal"  # Gaussian sensor noise; alias kind kept for the failure-mode ledger
    CHAR_SUBSTITUTE = "CharSubstitute"


class Method(str, enum.Enum):
    GAUSSIAN_TAIL = "GaussianTail"
    EMPIRICAL_FRACTION = "EmpiricalFraction"
    EXACT_COUNT = "ExactCount"


class Verdict(str, enum.Enum):
    CERTIFIED = "Certified"
    REJECTED = "Rejected"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class DomainSpec:
    """One perturbation domain: a kind, a magnitude, and its slice of the risk budget."""

    name: str
    kind: DomainKind
    epsilon: float
    omega: float
    sub_delta: float
    tau: float = 0.5


@dataclass(frozen=True)
class NormativeSpec:
    """The Stage One public record: thresholds, domains, dataset, and seed policy."""

    authority_id: str
    delta: float
    alpha: float
    category: int
    dataset_ref: str
    seed: int
    samples_per_point: int
    points_per_category: int
    domains: tuple[DomainSpec, ...]


@dataclass(frozen=True)
class ConfidenceVector:
    """Per-class scores for one input; must be softmax-normalized."""

    scores: tuple[float, ...]
    label_count: int

    def __post_init__(self):
        if self.label_count < 2 or len(self.scores) != self.label_count:
            raise ValueError("scores length must equal label_count >= 2")
        if any(not (0.0 <= s <= 1.0) or not math.isfinite(s) for s in self.scores):
            raise ValueError("every score must be a finite real in [0, 1]")
        if abs(math.fsum(self.scores) - 1.0) > 1e-6:
            raise ValueError("scores must sum to 1 within 1e-6")

    @property
    def argmax(self) -> int:
        return max(range(self.label_count), key=lambda i: self.scores[i])


@dataclass(frozen=True, eq=False)
class LabeledPoint:
    """One evaluation point: a dense input tensor (or codepoint sequence) plus its label."""

    id: str
    input: np.ndarray
    shape: tuple[int, ...]
    label: int
    is_text: bool = False

    @classmethod
    def image(cls, point_id: str, values, shape, label: int) -> "LabeledPoint":
        arr = np.asarray(values, dtype=np.float64).reshape(-1)
        shape = tuple(int(s) for s in shape)
        if arr.size != int(np.prod(shape)):
            raise ValueError(f"point {point_id}: input length {arr.size} != prod(shape)")
        return cls(point_id, arr, shape, int(label))

    @classmethod
    def text(cls, point_id: str, text: str, label: int) -> "LabeledPoint":
        if not text:
            raise ValueError(f"point {point_id}: empty text")
        arr = np.asarray([ord(c) for c in text], dtype=np.float64)
        return cls(point_id, arr, (len(text),), int(label), is_text=True)

    @property
    def as_text(self) -> str:
        return "".join(chr(int(c)) for c in self.input)


@dataclass(frozen=True)
class LocalRobustnessResult:
    """One local run: sample diagnostics plus the estimated local failure probability."""

    point_id: str
    k: int
    ad_statistic: float
    ad_passed: bool
    boxcox_lambda: Optional[float]
    ad_passed_after_boxcox: Optional[bool]
    method: Method
    p_fail: float
    bands: tuple = ()


@dataclass(frozen=True)
class BandReport:
    """Domain-level aggregate of one narrowing band across all evaluated points."""

    index: int
    epsilon_lo: float
    epsilon_hi: float
    certified: bool
    points_pass: int
    points_total: int
    p_fail_mean: float


@dataclass(frozen=True)
class GlobalRobustnessResult:
    """Aggregate over sampled points of one domain, with its concentration bound."""

    domain_name: str
    n: int
    p_mean: float
    hoeffding_radius: float
    p_upper: float
    normality_failures: int
    indeterminate: bool = False
    bands: tuple[BandReport, ...] = ()


@dataclass(frozen=True)
class Certificate:
    """The Stage Two output, hash-anchored over everything except its timestamp."""

    version: str
    spec_hash: str
    model_hash: str
    dataset_hash: str
    eligible_points: int
    excluded_points: int
    per_domain: tuple[GlobalRobustnessResult, ...]
    ledger: Any  # budget.BudgetLedger; typed loosely to keep module layering acyclic
    p_total: float
    verdict: Verdict
    seed: int
    tool_version: str
    issued_at: str
    content_hash: str


CERTIFICATE_VERSION = "certbound-certificate/1"


# --- canonical serialization ---------------------------------------------


def _check_finite(value: float, where: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise SerializationError(f"{where} is not finite")
    return value


def canonical_dumps(doc: Any) -> bytes:
    """Canonical JSON bytes: fixed key order (insertion order), no whitespace."""
    try:
        return json.dumps(
            doc, ensure_ascii=False, allow_nan=False, separators=(",", ":")
        ).encode("utf-8")
    except ValueError as exc:
        raise SerializationError(str(exc)) from exc


def content_hash(data: bytes) -> str:
    """Lowercase SHA-256 hex digest of a byte sequence."""
    return hashlib.sha256(data).hexdigest()


def domain_doc(d: DomainSpec) -> dict:
    return {
        "name": d.name,
        "kind": d.kind.value,
        "epsilon": _check_finite(d.epsilon, f"domain {d.name} epsilon"),
        "omega": _check_finite(d.omega, f"domain {d.name} omega"),
        "sub_delta": _check_finite(d.sub_delta, f"domain {d.name} sub_delta"),
        "tau": _check_finite(d.tau, f"domain {d.name} tau"),
    }


def spec_doc(spec: NormativeSpec) -> dict:
    return {
        "authority_id": spec.authority_id,
        "delta": _check_finite(spec.delta, "delta"),
        "alpha": _check_finite(spec.alpha, "alpha"),
        "category": int(spec.category),
        "dataset_ref": spec.dataset_ref,
        "seed": int(spec.seed),
        "samples_per_point": int(spec.samples_per_point),
        "points_per_category": int(spec.points_per_category),
        "domains": [domain_doc(d) for d in spec.domains],
    }


def _band_doc(b: BandReport) -> dict:
    return {
        "index": b.index,
        "epsilon_lo": _check_finite(b.epsilon_lo, "band epsilon_lo"),
        "epsilon_hi": _check_finite(b.epsilon_hi, "band epsilon_hi"),
        "certified": b.certified,
        "points_pass": b.points_pass,
        "points_total": b.points_total,
        "p_fail_mean": _check_finite(b.p_fail_mean, "band p_fail_mean"),
    }


def global_result_doc(r: GlobalRobustnessResult) -> dict:
    return {
        "domain_name": r.domain_name,
        "n": r.n,
        "p_mean": _check_finite(r.p_mean, "p_mean"),
        "hoeffding_radius": _check_finite(r.hoeffding_radius, "hoeffding_radius"),
        "p_upper": _check_finite(r.p_upper, "p_upper"),
        "normality_failures": r.normality_failures,
        "indeterminate": r.indeterminate,
        "bands": [_band_doc(b) for b in r.bands],
    }


def certificate_doc(cert: Certificate, with_issued_at: bool = True, with_hash: bool = True) -> dict:
    doc = {
        "version": cert.version,
        "spec_hash": cert.spec_hash,
        "model_hash": cert.model_hash,
        "dataset_hash": cert.dataset_hash,
        "eligible_points": cert.eligible_points,
        "excluded_points": cert.excluded_points,
        "per_domain": [global_result_doc(r) for r in cert.per_domain],
        "ledger": cert.ledger.to_doc(),
        "p_total": _check_finite(cert.p_total, "p_total"),
        "verdict": cert.verdict.value,
        "seed": int(cert.seed),
        "tool_version": cert.tool_version,
    }
    if with_issued_at:
        doc["issued_at"] = cert.issued_at
    if with_hash:
        doc["content_hash"] = cert.content_hash
    return doc


def certificate_content_hash(cert: Certificate) -> str:
    """Hash over every certificate field except issued_at and content_hash."""
    return content_hash(canonical_dumps(certificate_doc(cert, with_issued_at=False, with_hash=False)))


def canonical_serialize(value) -> bytes:
    """Canonical bytes of a NormativeSpec or Certificate."""
    if isinstance(value, NormativeSpec):
        return canonical_dumps(spec_doc(value))
    if isinstance(value, Certificate):
        return canonical_dumps(certificate_doc(value))
    raise SerializationError(f"cannot canonically serialize {type(value).__name__}")


def spec_hash(spec: NormativeSpec) -> str:
    return content_hash(canonical_serialize(spec))


# --- spec validation ------------------------------------------------------


def _require(raw: dict, name: str, kinds, path: str = ""):
    where = f"{path}{name}"
    if name not in raw:
        raise SpecValidationError(where, "missing field")
    value = raw[name]
    if not isinstance(value, kinds) or isinstance(value, bool):
        raise SpecValidationError(where, f"expected {kinds}, got {type(value).__name__}")
    return value


def _real(raw: dict, name: str, path: str = "") -> float:
    value = float(_require(raw, name, (int, float), path))
    if not math.isfinite(value):
        raise SpecValidationError(f"{path}{name}", "must be finite")
    return value


def _open_unit(raw: dict, name: str, path: str = "") -> float:
    value = _real(raw, name, path)
    if not 0.0 < value < 1.0:
        raise SpecValidationError(f"{path}{name}", f"must lie in (0, 1), got {value!r}")
    return value


def _validate_domain(raw: dict, index: int) -> DomainSpec:
    path = f"domains[{index}]."
    name = _require(raw, "name", str, path)
    kind_raw = _require(raw, "kind", str, path)
    try:
        kind = DomainKind(kind_raw)
    except ValueError:
        raise SpecValidationError(
            f"{path}kind", f"unknown kind {kind_raw!r}; expected one of "
            f"{[k.value for k in DomainKind]}"
        ) from None
    epsilon = _real(raw, "epsilon", path)
    if epsilon < 0:
        raise SpecValidationError(f"{path}epsilon", "must be >= 0")
    if kind is DomainKind.CHAR_SUBSTITUTE and epsilon != int(epsilon):
        raise SpecValidationError(f"{path}epsilon", "must be an integer substitution count")
    omega = _real(raw, "omega", path)
    if omega <= 0:
        raise SpecValidationError(f"{path}omega", "must be > 0")
    sub_delta = _open_unit(raw, "sub_delta", path)
    tau = _open_unit(raw, "tau", path) if "tau" in raw else 0.5
    unknown = set(raw) - {"name", "kind", "epsilon", "omega", "sub_delta", "tau"}
    if unknown:
        raise SpecValidationError(f"{path}{sorted(unknown)[0]}", "unknown field")
    return DomainSpec(name=name, kind=kind, epsilon=epsilon, omega=omega,
                      sub_delta=sub_delta, tau=tau)


def validate_spec(raw: dict) -> NormativeSpec:
    """Validate a parsed spec document; raises SpecValidationError with a field path."""
    if not isinstance(raw, dict):
        raise SpecValidationError("$", "spec document must be a JSON object")
    authority_id = _require(raw, "authority_id", str)
    delta = _open_unit(raw, "delta")
    alpha = _open_unit(raw, "alpha")
    category = _require(raw, "category", int)
    if category < 0:
        raise SpecValidationError("category", "must be a nonnegative class index")
    dataset_ref = _require(raw, "dataset_ref", str)
    seed = _require(raw, "seed", int)
    if not 0 <= seed < 2**64:
        raise SpecValidationError("seed", "must fit in an unsigned 64-bit integer")
    samples_per_point = _require(raw, "samples_per_point", int)
    if samples_per_point < 2:
        raise SpecValidationError("samples_per_point", "must be >= 2")
    points_per_category = _require(raw, "points_per_category", int)
    if points_per_category < 2:
        raise SpecValidationError("points_per_category", "must be >= 2")
    domains_raw = _require(raw, "domains", list)
    if not domains_raw:
        raise SpecValidationError("domains", "must be nonempty")
    domains = tuple(_validate_domain(d, i) for i, d in enumerate(domains_raw))
    names = [d.name for d in domains]
    if len(set(names)) != len(names):
        raise SpecValidationError("domains", f"duplicate domain names in {names}")
    committed = math.fsum(d.omega * d.sub_delta for d in domains)
    if committed > delta:
        raise SpecValidationError(
            "domains",
            f"infeasible budget: sum(omega_i * sub_delta_i) = {committed!r} exceeds delta = {delta!r}",
        )
    unknown = set(raw) - {
        "authority_id", "delta", "alpha", "category", "dataset_ref", "seed",
        "samples_per_point", "points_per_category", "domains",
    }
    if unknown:
        raise SpecValidationError(sorted(unknown)[0], "unknown field")
    return NormativeSpec(
        authority_id=authority_id,
        delta=delta,
        alpha=alpha,
        category=category,
        dataset_ref=dataset_ref,
        seed=seed,
        samples_per_point=samples_per_point,
        points_per_category=points_per_category,
        domains=domains,
    )


def load_spec(path) -> NormativeSpec:
    with open(path, "rb") as fh:
        try:
            raw = json.loads(fh.read().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise SpecValidationError("$", f"not a UTF-8 JSON document: {exc}") from exc
    return validate_spec(raw)


# --- certificate parsing --------------------------------------------------


def _parse_band(doc: dict) -> BandReport:
    return BandReport(
        index=int(doc["index"]),
        epsilon_lo=float(doc["epsilon_lo"]),
        epsilon_hi=float(doc["epsilon_hi"]),
        certified=bool(doc["certified"]),
        points_pass=int(doc["points_pass"]),
        points_total=int(doc["points_total"]),
        p_fail_mean=float(doc["p_fail_mean"]),
    )


def _parse_global_result(doc: dict) -> GlobalRobustnessResult:
    return GlobalRobustnessResult(
        domain_name=str(doc["domain_name"]),
        n=int(doc["n"]),
        p_mean=float(doc["p_mean"]),
        hoeffding_radius=float(doc["hoeffding_radius"]),
        p_upper=float(doc["p_upper"]),
        normality_failures=int(doc["normality_failures"]),
        indeterminate=bool(doc["indeterminate"]),
        bands=tuple(_parse_band(b) for b in doc["bands"]),
    )


def parse_certificate(doc: dict) -> Certificate:
    """Rebuild a Certificate from its JSON document (does not verify the hash)."""
    from .budget import BudgetLedger  # deferred: budget imports core

    try:
        return Certificate(
            version=str(doc["version"]),
            spec_hash=str(doc["spec_hash"]),
            model_hash=str(doc["model_hash"]),
            dataset_hash=str(doc["dataset_hash"]),
            eligible_points=int(doc["eligible_points"]),
            excluded_points=int(doc["excluded_points"]),
            per_domain=tuple(_parse_global_result(r) for r in doc["per_domain"]),
            ledger=BudgetLedger.from_doc(doc["ledger"]),
            p_total=float(doc["p_total"]),
            verdict=Verdict(doc["verdict"]),
            seed=int(doc["seed"]),
            tool_version=str(doc["tool_version"]),
            issued_at=str(doc["issued_at"]),
            content_hash=str(doc["content_hash"]),
        )
    except KeyError as exc:
        raise SerializationError(f"certificate document missing field {exc}") from exc


def load_certificate(path) -> Certificate:
    with open(path, "rb") as fh:
        return parse_certificate(json.loads(fh.read().decode("utf-8")))


def verify_certificate_hash(cert: Certificate) -> bool:
    return certificate_content_hash(cert) == cert.content_hash
