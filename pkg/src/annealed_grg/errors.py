"""Exception hierarchy. ``exit_code`` is what the CLI returns for each family."""


class AnnealedError(Exception):
    exit_code = 1


class ConfigError(AnnealedError, ValueError):
    exit_code = 2


class DomainError(AnnealedError, ValueError):
    """Parameter outside the domain where an operation is defined."""


class OutOfScopeError(DomainError):
    """Model outside the supported regime (e.g. Pareto weights with tau <= 3)."""


class EvaluationError(AnnealedError, ValueError):
    """A user-supplied function returned a non-finite value."""


class UnsupportedOrderError(AnnealedError, ValueError):
    pass


class UnsupportedError(AnnealedError):
    pass


class DegenerateModelError(AnnealedError, ValueError):
    pass


class NotFoundError(AnnealedError):
    """No cumulant order qualifies; ``cumulants`` holds what was scanned."""

    def __init__(self, message, cumulants=None):
        super().__init__(message)
        self.cumulants = cumulants


class SolverError(AnnealedError):
    exit_code = 3


class NonConvergenceError(SolverError):
    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class WindowTooWideError(SolverError):
    pass


class CapacityError(AnnealedError):
    exit_code = 4


class IntegrationError(AnnealedError):
    exit_code = 5
