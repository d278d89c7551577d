"""Exception types shared across the package.

The CLI maps these onto exit codes: usage errors exit 2, data/config
errors exit 3, numeric failures exit 4.
"""


class PulseError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(PulseError):
    """Operand shapes are incompatible for the requested operation."""


class DomainError(PulseError):
    """A value is outside the mathematically valid domain of an operation."""


class UsageError(PulseError):
    """An API or CLI precondition was violated by the caller."""


class ConfigError(PulseError):
    """A configuration is internally inconsistent or unsupported."""


class DataError(PulseError):
    """A dataset, checkpoint, or other input file is missing or malformed."""


class NumericError(PulseError):
    """A numeric failure (NaN/Inf) occurred where finite values are required."""
