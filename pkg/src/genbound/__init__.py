"""Information-theoretic generalization bounds: MI, IMI, CMI, CIMI and ICIMI,
evaluated exactly on finite problems and by Monte Carlo on Gaussian mean
estimation."""

__version__ = "0.1.0"

from .bounds import (
    all_bounds,
    cimi_bound,
    cmi_bound,
    compare_bounds,
    decoupling_conjugates,
    icimi_bound,
    icimi_bounded_loss,
    imi_bound,
    mi_bound,
    strengthened_cimi,
    strengthened_cmi,
    table1_report,
)
from .core_model import (
    FiniteDistribution,
    FiniteProblem,
    GaussianProblem,
    GenErrorEstimate,
    true_gen_error,
)
from .errors import (
    DomainError,
    GenBoundError,
    InvariantViolation,
    NumericError,
    ResourceError,
    UnsupportedMethodError,
)
from .reports import BoundComparison, BoundReport

__all__ = [
    "BoundComparison",
    "BoundReport",
    "DomainError",
    "FiniteDistribution",
    "FiniteProblem",
    "GaussianProblem",
    "GenBoundError",
    "GenErrorEstimate",
    "InvariantViolation",
    "NumericError",
    "ResourceError",
    "UnsupportedMethodError",
    "all_bounds",
    "cimi_bound",
    "cmi_bound",
    "compare_bounds",
    "decoupling_conjugates",
    "icimi_bound",
    "icimi_bounded_loss",
    "imi_bound",
    "mi_bound",
    "strengthened_cimi",
    "strengthened_cmi",
    "table1_report",
    "true_gen_error",
]
