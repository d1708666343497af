"""Finite-length security bounds for BB84 with random privacy amplification."""

__version__ = "0.1.0"

from .asymptotics import (
    AsymptoticConfig,
    exponent,
    large_deviation_bound,
    normal_limit,
    solve_delta,
    table_statistic,
    watanabe_bound,
)
from .errors import ConfigurationError, ConvergenceError, DomainError, GuardError, QKDBoundError
from .secbounds import (
    BoundReport,
    PhaseWeightDistribution,
    ProtocolParams,
    probabilistic_guarantee,
    theorem1_bound,
    theorem2_bound,
    theorem5_bound,
)

__all__ = [
    "AsymptoticConfig",
    "BoundReport",
    "ConfigurationError",
    "ConvergenceError",
    "DomainError",
    "GuardError",
    "PhaseWeightDistribution",
    "ProtocolParams",
    "QKDBoundError",
    "exponent",
    "large_deviation_bound",
    "normal_limit",
    "probabilistic_guarantee",
    "solve_delta",
    "table_statistic",
    "theorem1_bound",
    "theorem2_bound",
    "theorem5_bound",
    "watanabe_bound",
]
