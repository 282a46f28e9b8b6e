"""Exception types shared across the package."""


class LBQLError(Exception):
    """Base class for package errors."""


class InvalidIntervalError(LBQLError, ValueError):
    """Raised when a projection interval has ``lo > hi``."""


class UnsupportedModelError(LBQLError):
    """Raised when an operation needs an enumerable noise support the model lacks."""


class NoConvergenceError(LBQLError):
    """Raised when value iteration exhausts its sweep budget.

    The last sup-norm residual is kept on ``residual``.
    """

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class UndefinedMetricError(LBQLError, ValueError):
    """Raised when the relative error is requested against a zero reference."""


class EmptyBufferError(LBQLError):
    """Raised when an empirical expectation or buffer draw has no observations."""


class ConfigError(LBQLError, ValueError):
    """Invalid run configuration (CLI exit code 2)."""


class UnsupportedMetricError(LBQLError):
    """Requested metric cannot be computed for this environment (CLI exit code 3)."""
