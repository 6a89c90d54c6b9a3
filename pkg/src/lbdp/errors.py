"""Exception hierarchy shared across the package."""


class LBDPError(Exception):
    """Base class for all package errors."""


class InvalidParams(LBDPError, ValueError):
    pass


class CriticalProcess(InvalidParams):
    """Raised when a reparameterization is undefined because birth == death."""


class InvalidSeries(LBDPError, ValueError):
    pass


class DomainError(LBDPError, ValueError):
    pass


class OverflowGuard(LBDPError, ArithmeticError):
    """A series evaluation left the representable range or cancelled badly."""


class DegenerateVariance(LBDPError, ArithmeticError):
    pass


class NotEquidistant(LBDPError, ValueError):
    pass


class DegenerateData(LBDPError, ValueError):
    pass


class UndefinedEstimate(LBDPError, ArithmeticError):
    pass


class NoRoot(LBDPError, ArithmeticError):
    pass


class NonConvergence(LBDPError, ArithmeticError):
    pass


class InnerSolveFailure(LBDPError, ArithmeticError):
    pass


class ScheduleBeyondTrajectory(LBDPError, ValueError):
    pass


class QuadratureFailure(LBDPError, ArithmeticError):
    pass


class OutOfBounds(LBDPError, ArithmeticError):
    pass


class OutOfRange(LBDPError, ValueError):
    pass


class EmptyGroup(LBDPError, ValueError):
    pass


class ConfigError(LBDPError, ValueError):
    pass
