"""Exception hierarchy shared by the solver, recovery and experiment layers."""


class QCompError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(QCompError, ValueError):
    pass


class InvalidParameterError(QCompError, ValueError):
    pass


class DelaySpreadError(InvalidDimensionError):
    """Channel delay spread exceeds the OFDM symbol length (L > K)."""


class UnsupportedResolutionError(InvalidParameterError):
    pass


class InfeasibleGeometryError(QCompError):
    pass


class InfeasibleTargetError(QCompError):
    """The SQINR targets cannot be met (virtual uplink powers diverge)."""


class NoConvergenceError(QCompError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class SingularSystemError(QCompError):
    pass


class DegenerateDualityError(QCompError):
    """The downlink scaling system is singular."""


class InvalidScalingError(QCompError):
    """A recovered downlink power scaling was nonpositive."""
