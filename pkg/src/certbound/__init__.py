"""certbound: statistical robustness certification for black-box classifiers."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    Certificate,
    ConfidenceVector,
    DomainKind,
    DomainSpec,
    GlobalRobustnessResult,
    LabeledPoint,
    LocalRobustnessResult,
    Method,
    NormativeSpec,
    Verdict,
    canonical_serialize,
    content_hash,
    load_certificate,
    load_spec,
    spec_hash,
    validate_spec,
    verify_certificate_hash,
)
from .adapters import (  # noqa: F401
    ModelHandle,
    classify,
    classify_batch,
    load_builtin,
    open_model,
)
from .dataset import Dataset, load_dataset  # noqa: F401
from .roma import Fallback, RomaConfig, extract_score, narrow_domain, roma_local  # noqa: F401
from .groma import CategorySample, groma_global, select_points  # noqa: F401
from .budget import BudgetLedger, aggregate, verdict  # noqa: F401
from .oracle import EnumerationPlan, exact_count, oracle_compare, plan_enumeration  # noqa: F401
from .certify import (  # noqa: F401
    RecheckOutcome,
    plan_sample_size,
    recheck,
    run_certification,
    write_certificate,
)
from .stats import (  # noqa: F401
    anderson_darling,
    box_cox,
    gaussian_tail,
    hoeffding_radius,
    hoeffding_sample_size,
)
