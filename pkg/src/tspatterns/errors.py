"""Exception types raised across the package."""


class ContractError(ValueError):
    """An input violates a documented precondition."""


class ShapeError(ContractError):
    """Array dimensions are inconsistent."""


class NotPositiveDefiniteError(ContractError):
    """A matrix that must be SPD has a non-positive eigenvalue."""


class DegenerateInputError(ContractError):
    """Input is degenerate (zero trace, constant target, zero variance...)."""


class NumericalError(ArithmeticError):
    """A linear algebra routine failed."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration limit."""

    def __init__(self, message, gradient_norm=None, n_iter=None):
        super().__init__(message)
        self.gradient_norm = gradient_norm
        self.n_iter = n_iter
