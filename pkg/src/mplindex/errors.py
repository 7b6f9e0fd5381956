"""Exception types shared across the package.

Two families matter for exit-code mapping in the CLI: ValidationError
(bad input data, exit 1) and EstimationError (a numerical step cannot
be completed, exit 2).
"""

from __future__ import annotations


class MplIndexError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MplIndexError):
    """Input data violates a structural contract."""


class EstimationError(MplIndexError):
    """A numerical estimation step cannot be completed."""


class DuplicateObservation(ValidationError):
    """The same (item, unit) cell appears more than once in the input."""


class InconsistentCell(ValidationError):
    """A cell mixes positive and nonpositive value/quantity entries."""


class FormatError(ValidationError):
    """A row of the input stream cannot be parsed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyBasket(ValidationError):
    """No item satisfies the reference-basket rule."""


class BasketViolation(ValidationError):
    """An item is present in fewer than two units."""


class InvalidPrice(ValidationError):
    """A present cell implies a nonpositive or non-finite price."""


class InvalidDimension(ValidationError):
    """A dimension argument is out of range for the requested operation."""


class UnidentifiedModel(ValidationError):
    """The presence graph is disconnected, so level effects are not identified."""

    def __init__(self, message: str, components: tuple | None = None):
        super().__init__(message)
        self.components = components or ()


class SingularSystem(EstimationError):
    """The least-squares system is rank deficient."""

    def __init__(self, message: str, column: str | None = None):
        if column is not None:
            message = f"{message} (dependent column: {column})"
        super().__init__(message)
        self.column = column


class UndefinedVariance(EstimationError):
    """A variance was requested but the noise scale is undefined (no residual dof)."""


class DegenerateDeflator(EstimationError):
    """A deflator estimate is zero where a reciprocal or variance is required."""


class DegenerateForm(EstimationError):
    """The quadratic form vanishes on the base price vector."""


class RedrawExhausted(EstimationError):
    """Noise persistently drives simulated values nonpositive."""
