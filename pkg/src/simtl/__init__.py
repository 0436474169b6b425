"""Scale-invariant multi-task gradient balancing on desk-scale task suites."""

from simtl.errors import (
    ConfigError,
    DimensionError,
    DivergenceError,
    DomainError,
    EvaluationError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DimensionError",
    "DivergenceError",
    "DomainError",
    "EvaluationError",
]
