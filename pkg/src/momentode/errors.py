"""Exception types shared across the package."""


class MomentodeError(Exception):
    """Base class for all package-specific errors."""


class SpecValidationError(MomentodeError, ValueError):
    """A distribution spec or run config failed validation."""


class ModelDomainError(MomentodeError, ValueError):
    """Model evaluated outside its parameter domain (e.g. r0 <= 0)."""


class IntegrationError(MomentodeError, RuntimeError):
    """ODE integration failed (step underflow or step budget exhausted)."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class NonFiniteOutputError(MomentodeError, ArithmeticError):
    """A model output or derivative came back NaN/Inf."""

    def __init__(self, message, index=None, theta=None):
        super().__init__(message)
        self.index = index
        self.theta = theta


class DegenerateOutputError(MomentodeError, ValueError):
    """A propagated output has non-positive variance after conditioning."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConditioningError(MomentodeError, ValueError):
    """A covariance matrix could not be repaired by diagonal jitter."""


class CopulaTableMissingError(MomentodeError, FileNotFoundError):
    """No correlation-map table available; build one first."""


class TableBuildError(MomentodeError, RuntimeError):
    """Copula table construction failed (non-monotone forward map)."""


class OptimizationError(MomentodeError, RuntimeError):
    """All optimizer starts failed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []
