"""Exception types raised across the package."""


class SMetricError(Exception):
    """Base class for all package errors."""


class DimensionError(SMetricError, ValueError):
    """Points of different dimension were combined."""


class DomainError(SMetricError, ValueError):
    """An argument lies outside the domain of an operation (NaN coordinates, negative radius, ...)."""


class UsageError(SMetricError, ValueError):
    """An operation was called with arguments that violate its preconditions."""


class ConfigError(SMetricError):
    """An experiment configuration could not be parsed or resolved."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
