"""Exception hierarchy shared across the toolkit."""


class CertboundError(Exception):
    """Base class for all toolkit errors."""


class SpecValidationError(CertboundError):
    """A normative-spec document violates an invariant.

    `field` carries the path of the offending field, e.g. ``domains[1].omega``.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class SerializationError(CertboundError):
    """Canonical serialization cannot represent the value (e.g. non-finite real)."""


class AdapterError(CertboundError):
    """Transport-level failure while talking to a model adapter."""


class ProtocolViolationError(AdapterError):
    """The adapter answered, but the response breaks the wire contract."""


class ShapeMismatchError(AdapterError):
    """Input shape does not match the model handle's declared shape."""


class InsufficientSamplesError(CertboundError):
    """Too few samples for the requested statistic."""


class DegenerateSampleError(CertboundError):
    """Sample has zero variance; the statistic is undefined."""


class InsufficientDataError(CertboundError):
    """Dataset holds fewer eligible points than requested."""

    def __init__(self, requested: int, available: int, category: int):
        self.requested = requested
        self.available = available
        self.category = category
        super().__init__(
            f"category {category}: requested {requested} points, only "
            f"{available} correctly classified points available"
        )


class DomainMismatchError(CertboundError):
    """Per-domain results do not line up one-to-one with the spec's domains."""


class InfeasiblePlanError(CertboundError):
    """Enumeration plan exceeds its evaluation budget."""

    def __init__(self, total: int, budget: int):
        self.total = total
        self.budget = budget
        super().__init__(f"enumeration of {total} inputs exceeds budget {budget}")


class EstimateUnavailableError(CertboundError):
    """Every configured fallback failed to produce a local estimate."""

    def __init__(self, point_id: str, detail: str):
        self.point_id = point_id
        super().__init__(f"point {point_id}: no valid estimate ({detail})")


class PointMisclassifiedError(CertboundError):
    """A point failed the correctly-classified precondition of a local run."""

    def __init__(self, point_id: str):
        self.point_id = point_id
        super().__init__(f"point {point_id} is misclassified at epsilon=0")


class CertificateTamperError(CertboundError):
    """Stored certificate content hash does not verify."""
