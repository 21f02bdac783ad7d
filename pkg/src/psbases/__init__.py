"""Desk-scale experiments on thin additive subbases of Piatetski-Shapiro sequences."""

__version__ = "0.1.0"

from .core import RegVarFn, SequenceSpec, thresholds
from .errors import ConsistencyError, DomainError, PrecisionError, PSBasesError, ResourceError

__all__ = [
    "__version__", "SequenceSpec", "RegVarFn", "thresholds",
    "PSBasesError", "DomainError", "ResourceError", "ConsistencyError", "PrecisionError",
]
