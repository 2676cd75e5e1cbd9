"""Exception types shared across the package."""


class FWError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FWError, ValueError):
    """Invalid discretization or run parameters."""


class DomainError(FWError, ValueError):
    """Argument outside the mathematical domain of an operation (e.g. c <= 1)."""


class DataError(FWError, ValueError):
    """Input data unusable for the requested analysis."""


class BarrierBreachError(FWError, RuntimeError):
    """Iterate left the open H^1 ball on which the penalized functional is defined."""


class BlowUpError(FWError, RuntimeError):
    """Time integration produced non-finite or runaway values.

    Attributes
    ----------
    time : float
        Simulation time at which blow-up was detected.
    states : list
        States recorded before blow-up.
    """

    def __init__(self, message, time, states=None, trace=None):
        super().__init__(message)
        self.time = time
        self.states = states or []
        self.trace = trace
