"""Exception hierarchy shared by every subpackage."""


class MfbenchError(Exception):
    """Base class for all package errors."""


class DimensionError(MfbenchError, ValueError):
    pass


class ConfigError(MfbenchError, ValueError):
    pass


class StateError(MfbenchError, RuntimeError):
    pass


class DeterminismError(MfbenchError, RuntimeError):
    pass


class TrainingError(MfbenchError, RuntimeError):
    pass


class ConsistencyError(MfbenchError, RuntimeError):
    """Raised when an internal invariant (e.g. stop-gradient isolation) is broken."""


class ScoreError(MfbenchError, ValueError):
    """R-Score requested against a zero baseline."""
