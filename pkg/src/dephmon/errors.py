"""Exception types shared across the package."""


class DephmonError(Exception):
    """Base class for all package errors."""


class DimensionOverflowError(DephmonError):
    """Qubit count exceeds the dense-matrix limit N_MAX."""


class StateInvariantError(DephmonError):
    """A state or operator violates a numerical invariant (hermiticity,
    trace, positivity, purity)."""


class TimeStepError(DephmonError):
    """Invalid time or step size passed to an integrator."""


class ConfigError(DephmonError):
    """Malformed run configuration (file or command line)."""
