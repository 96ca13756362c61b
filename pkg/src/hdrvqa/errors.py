"""Exception hierarchy. The CLI maps these onto stable exit codes."""


class HdrVqaError(Exception):
    """Base class for all package errors."""


class DataError(HdrVqaError, ValueError):
    """Malformed or inconsistent input data (exit code 3)."""


class VideoFormatError(DataError):
    """Unsupported, truncated or self-contradictory video input."""


class LayoutMismatchError(DataError):
    """Feature layout version or length does not match the model."""


class NumericError(HdrVqaError, ArithmeticError):
    """Numerical failure that cannot be recovered locally (exit code 4)."""


class DegenerateFitError(NumericError):
    """Distribution fit is undefined for the given samples."""
