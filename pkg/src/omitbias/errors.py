"""Exception types shared across the package.

The CLI maps these onto exit codes: contract errors exit 2, numerical
failures exit 3 and I/O problems exit 4.
"""

from __future__ import annotations


class ContractError(ValueError):
    """Inputs violate a documented precondition (shape, range, method scope)."""


class DomainError(ContractError):
    """A scalar argument lies outside the domain of a function."""


class NumericalError(ArithmeticError):
    """A computation could not be completed to the required accuracy."""


class SeparationError(NumericalError):
    """Fitted coefficients diverge, indicating (quasi-)complete separation."""


class ConvergenceError(NumericalError):
    """An iterative solver stopped before meeting its tolerance."""

    def __init__(self, message: str, residual: float | None = None) -> None:
        super().__init__(message)
        self.residual = residual
