"""Exception hierarchy. The CLI maps each class to an exit status."""


class PSBasesError(Exception):
    exit_code = 1


class DomainError(PSBasesError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""

    exit_code = 2


class ResourceError(PSBasesError):
    """A request would exceed a configured size or precision budget."""

    exit_code = 3


class ConsistencyError(PSBasesError):
    """An internal numerical self-check failed."""

    exit_code = 4


class PrecisionError(ConsistencyError):
    """Floating-point FFT output could not be rounded to integers safely."""
