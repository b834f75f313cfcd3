"""Exception hierarchy.

Each family maps to one CLI exit code: usage problems exit 1, bad input data
exits 2, numerical failures exit 3.
"""


class DepthmonError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(DepthmonError, ValueError):
    """Invalid parameters or configuration."""

    exit_code = 1


class DataError(DepthmonError, ValueError):
    """Malformed or insufficient input data."""

    exit_code = 2


class ParseError(DataError):
    """A CSV row could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InsufficientDataError(DataError):
    """Fewer records than requested were available."""

    def __init__(self, message: str, available: int):
        self.available = available
        super().__init__(f"{message} (available: {available})")


class UnknownClassError(DataError):
    """A predicted class has no reference set."""

    def __init__(self, label):
        self.label = label
        super().__init__(f"no reference set for predicted class {label!r} and no merged fallback")


class UnsupportedDimensionError(DataError):
    """The requested depth is not available in this dimension."""


class NumericError(DepthmonError, ArithmeticError):
    """A numerical procedure failed."""

    exit_code = 3


class SingularCovarianceError(NumericError):
    """The reference covariance matrix is not invertible."""


class TrainingError(NumericError):
    """Network training did not reach the required accuracy."""
