"""Exception types raised across the package."""


class QCLimitError(Exception):
    """Base class for all package errors."""


class ConfigurationError(QCLimitError, ValueError):
    pass


class ContractViolation(QCLimitError, ValueError):
    """An input broke a documented precondition (e.g. a non-Hermitian H)."""


class DimensionMismatch(QCLimitError, ValueError):
    pass


class TruncationError(QCLimitError):
    """A truncated representation lost more norm than allowed."""

    def __init__(self, message, deficit=None, exit_time=None):
        super().__init__(message)
        self.deficit = deficit
        self.exit_time = exit_time


class ConvergenceError(QCLimitError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularEvaluationError(QCLimitError, ValueError):
    pass


class NoRelaxationError(QCLimitError):
    """Every pole sits on the real axis, so there is no relaxation time."""


class FitError(QCLimitError, ValueError):
    pass


class DegenerateWeightsError(QCLimitError, ValueError):
    pass


class NonExhaustiveObservablesError(QCLimitError, ValueError):
    pass


class BoundaryMassError(QCLimitError):
    def __init__(self, message, mass=None):
        super().__init__(message)
        self.mass = mass


class ResolutionError(QCLimitError):
    pass


class SmoothnessError(QCLimitError):
    pass


class GridMismatchError(QCLimitError, ValueError):
    pass


class EmptyDomainError(QCLimitError, ValueError):
    pass


class UnsupportedGeometryError(QCLimitError, ValueError):
    pass
