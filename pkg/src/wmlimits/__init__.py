"""Exact limits and reference constructions for multi-bit watermark detection."""

from wmlimits.errors import (
    AuditError,
    CapacityError,
    ConfigError,
    InfeasibleError,
    SolverError,
    WatermarkError,
)
from wmlimits.process_models import (
    Alphabet,
    MarkovSource,
    SequencePmf,
    enumerate_sequence_pmf,
    entropy,
    entropy_rate,
    kl_divergence,
    stationary_distribution,
    tv_distance,
)

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "AuditError",
    "CapacityError",
    "ConfigError",
    "InfeasibleError",
    "MarkovSource",
    "SequencePmf",
    "SolverError",
    "WatermarkError",
    "__version__",
    "enumerate_sequence_pmf",
    "entropy",
    "entropy_rate",
    "kl_divergence",
    "stationary_distribution",
    "tv_distance",
]
