"""
Exception Hierarchy

Every failure raised by the library derives from GESError, so callers
(the pipeline nodes and the CLI) can catch one type and turn it into a
failed report row or an exit status.

Errors that describe a bad argument also derive from ValueError.
"""


class GESError(Exception):
    """Base class for all library errors."""


class InvalidEdgeError(GESError, ValueError):
    """A vertex pair or edge slot outside the valid range."""


class ConfigError(GESError, ValueError):
    """Invalid experiment or solver configuration."""


class SynthesisError(GESError):
    """A ground-truth precision matrix could not be made positive definite."""


class NotPositiveDefiniteError(GESError, ValueError):
    """A matrix that must be positive definite failed its Cholesky factorization."""


class NonconvergenceError(GESError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class DegenerateSplitError(GESError, ValueError):
    """A sample split would leave one of the pieces empty."""

    def __init__(self, message: str, minimum: int):
        super().__init__(message)
        self.minimum = minimum


class EnumerationError(GESError):
    """A pattern space is too large to enumerate, or no pattern in it could be fit."""


class WeightError(GESError, ValueError):
    """Log-weights that cannot be normalized (empty, NaN or infinite)."""


class ParseError(GESError, ValueError):
    """A malformed input file. Row and column are 1-based."""

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ReportError(GESError):
    """A report could not be written."""


class ShapeError(GESError, ValueError):
    """Matrices or patterns whose dimensions do not match."""
