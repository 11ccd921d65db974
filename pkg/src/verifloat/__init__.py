"""verifloat: verified compilation of real-valued programs to finite precision.

The package takes programs written against ideal real semantics, with
uncertainty bounds on inputs and required accuracy on outputs, and determines
the cheapest floating-point format whose worst-case deviation from the real
result provably stays within the stated bounds.  It then emits runnable
finite-precision code whose postcondition records what was actually proven.
"""

__version__ = "0.1.0"

from .engine import (
    AnalysisConfig,
    AnalysisIssue,
    AnalysisResult,
    ErrorAnalysis,
    analyze,
)
from .intervals import DivisionByZeroRange, Interval, NegativeSqrtRange
from .precision import PRECISIONS, precision_by_name
from .ranges import InfeasibleRegion, RangeConfig, RangeEngine, get_range
from .rationals import rat

__all__ = [
    "AnalysisConfig",
    "AnalysisIssue",
    "AnalysisResult",
    "DivisionByZeroRange",
    "ErrorAnalysis",
    "InfeasibleRegion",
    "Interval",
    "NegativeSqrtRange",
    "PRECISIONS",
    "RangeConfig",
    "RangeEngine",
    "analyze",
    "get_range",
    "precision_by_name",
    "rat",
    "__version__",
]
