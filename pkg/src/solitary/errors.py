"""Exception hierarchy shared by the solver modules."""


class SolitaryError(Exception):
    """Base class for every error raised by this package."""


class ContractError(SolitaryError, ValueError):
    """Input violates a documented precondition (shape, sign, grid mismatch)."""


class DomainError(SolitaryError, ValueError):
    """Argument outside the mathematical domain of the operation."""


class NumericError(SolitaryError, ArithmeticError):
    """Overflow or other non-finite intermediate result."""


class DegenerateIterateError(SolitaryError):
    """Stabilizing factor undefined (zero or near-zero denominator)."""


class DegenerateCycleError(SolitaryError):
    """MPE coefficients cannot be normalized (their sum vanishes)."""


class InnerSolveError(SolitaryError):
    """Implicit stage failed to converge; a smaller time step is needed."""


class MeasurementError(SolitaryError):
    """Peak or speed measurement is ambiguous."""


class DegenerateFitError(SolitaryError):
    """Least-squares fit has singular normal equations."""
