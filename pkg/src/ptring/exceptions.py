"""Exception and warning types raised across the package."""


class PtringError(Exception):
    """Base class for all package errors."""


class SingularSystemError(PtringError, ArithmeticError):
    """Steady-state linear system is exactly singular (lossless, on resonance)."""


class InfiniteLifetimeError(PtringError, ArithmeticError):
    pass


class JitterDominatedError(PtringError, ValueError):
    """Measured 1/e width is smaller than the combined channel jitter."""


class ConvergenceError(PtringError, RuntimeError):
    pass


class NoPeakError(PtringError, ValueError):
    pass


class ZeroAccidentalError(PtringError, ZeroDivisionError):
    pass


class DegenerateFitError(PtringError, ValueError):
    pass


class InsufficientStatisticsError(PtringError, ValueError):
    pass


class IdentifiabilityWarning(UserWarning):
    """Parameter covariance is ill-conditioned; some parameters are not identifiable."""


class IntegrationWindowWarning(UserWarning):
    pass
