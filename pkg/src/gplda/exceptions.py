"""Exception types shared across the package.

Two families matter to callers: :class:`ValidationError` covers bad inputs
(shapes, labels, hyperparameter ranges, unparsable files) and maps to CLI
exit code 1, while :class:`NumericError` covers failures of the numerics
themselves (singular factorizations, diverging sweeps) and maps to exit
code 2.
"""

from __future__ import annotations


class ValidationError(ValueError):
    """Input data, configuration, or state failed validation."""


class DimensionError(ValidationError):
    """Array shapes or grid dimensions are inconsistent."""


class ParseError(ValidationError):
    """A text input could not be parsed.

    Carries one-based ``row`` and ``column`` indices when they are known.
    """

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class HyperParameterError(ValidationError):
    """A hyperparameter value or combination is outside the valid range."""


class NumericError(ArithmeticError):
    """A numeric computation failed or produced an unusable result."""


class SingularMatrixError(NumericError):
    """A matrix that must be positive definite could not be factorized."""


class DegenerateBetweenCovarianceError(NumericError):
    """The between-class covariance is numerically zero, so no discriminant
    direction is identifiable."""


class NumericFailureError(NumericError):
    """An iterative estimate became non-finite.

    ``sweep`` records the one-based sweep index at which the failure was
    detected.
    """

    def __init__(self, message: str, sweep: int | None = None):
        super().__init__(message)
        self.sweep = sweep
