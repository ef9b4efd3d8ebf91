"""Exception types raised across the package."""


class StabLabError(Exception):
    """Base class for every error raised by stablab."""


class ParameterError(StabLabError, ValueError):
    pass


class ShapeError(StabLabError, ValueError):
    pass


class DomainError(StabLabError, ValueError):
    pass


class DegenerateClassError(StabLabError, ValueError):
    """Raised when an operation would leave a class with no samples."""


class DegenerateVectorError(StabLabError, ValueError):
    """Raised when a direction is requested for a zero vector."""


class UnsupportedEncoderError(StabLabError, TypeError):
    pass


class PreconditionError(StabLabError, ValueError):
    def __init__(self, message, threshold=None):
        super().__init__(message)
        self.threshold = threshold


class ConvergenceError(StabLabError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InfeasibleError(StabLabError, RuntimeError):
    """The hard-margin problem has no feasible solution."""


class DivergenceError(StabLabError, RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class FormatError(StabLabError, ValueError):
    pass
