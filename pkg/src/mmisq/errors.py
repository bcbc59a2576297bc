"""Exception types shared across the package."""


class MmisqError(Exception):
    """Base class for all package-specific errors."""


class NegativeRate(MmisqError):
    """An off-diagonal transition rate is negative."""


class RowSumViolation(MmisqError):
    """A generator row sum deviates from zero beyond repair tolerance."""


class Reducible(MmisqError):
    """The chain is not irreducible on the positive-rate digraph."""


class SingularSystem(MmisqError):
    """A linear solve failed; usually signals a (near-)reducible chain."""


class OrderViolation(MmisqError):
    """Time arguments violate the required ordering (e.g. s > t)."""


class UnsortedOffsets(MmisqError):
    """Observation offsets must satisfy 0 = s_1 <= ... <= s_K."""


class ScenarioMismatch(MmisqError):
    """A sample batch does not match the scenario it is checked against."""


class DegenerateVariance(MmisqError):
    """The theoretical variance is zero; the CLT check is undefined."""


class InsufficientPoints(MmisqError):
    """Too few data points for the requested fit."""


class ConfigError(MmisqError):
    """Scenario configuration is invalid; carries the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class IoFailure(MmisqError):
    """Reading or writing a report/output file failed."""
