"""Simulation and numerics for biased random multiplicative functions."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BMFError,
    CapacityError,
    CoverageError,
    DomainError,
    EmptyRangeError,
    InsufficientDataError,
    NumericalError,
    PreconditionError,
    UsageError,
)
from .sampling import BiasProfile, DeltaRule, OmegaSample, PrimeSignVector  # noqa: E402
from .sieve import MultiplicativeTable, PartialSumSeries, SieveTables  # noqa: E402

__all__ = [
    "BMFError",
    "BiasProfile",
    "CapacityError",
    "CoverageError",
    "DeltaRule",
    "DomainError",
    "EmptyRangeError",
    "InsufficientDataError",
    "MultiplicativeTable",
    "NumericalError",
    "OmegaSample",
    "PartialSumSeries",
    "PreconditionError",
    "PrimeSignVector",
    "SieveTables",
    "UsageError",
    "__version__",
]
