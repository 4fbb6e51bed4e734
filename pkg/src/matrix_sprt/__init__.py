"""Sequential multi-hypothesis tests (matrix SPRT, mixture and adaptive variants)."""

from .core import (
    AMSPRT,
    MMSPRT,
    MSPRT,
    ConfigurationError,
    Decision,
    EngineKind,
    ErrorBudget,
    HypothesisLayout,
    PriorGrid,
    Region,
    TestRunState,
    ThresholdMatrix,
    build_threshold_matrix,
)

__all__ = [
    "AMSPRT",
    "MMSPRT",
    "MSPRT",
    "ConfigurationError",
    "Decision",
    "EngineKind",
    "ErrorBudget",
    "HypothesisLayout",
    "PriorGrid",
    "Region",
    "TestRunState",
    "ThresholdMatrix",
    "build_threshold_matrix",
]
