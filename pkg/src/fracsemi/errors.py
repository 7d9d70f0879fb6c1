"""Exception hierarchy shared by all fracsemi modules."""


class FracSemiError(Exception):
    """Base class for every error raised by the package."""


class InvalidFieldError(FracSemiError, ValueError):
    pass


class DomainError(FracSemiError, ValueError):
    """A parameter lies outside the domain where an operation is defined."""


class DegenerateDensityError(DomainError):
    pass


class ConfigurationError(FracSemiError, ValueError):
    """A grid, window or experiment setting violates a documented bound."""


class AccuracyError(FracSemiError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConvergenceError(FracSemiError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CapabilityError(FracSemiError):
    """Requested path is too expensive for the grid (e.g. dense eigensolve)."""


class FitQualityError(FracSemiError):
    def __init__(self, message, r_squared=None):
        super().__init__(message)
        self.r_squared = r_squared


class NumericalError(FracSemiError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
