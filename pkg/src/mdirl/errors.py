"""Exception types raised across the package."""


class MdirlError(Exception):
    """Base class for all package errors."""


class DomainError(MdirlError, ValueError):
    """An input left the domain where a regularizer or density is defined."""


class ConvergenceError(MdirlError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InadmissibleStepError(MdirlError, ValueError):
    """A mirror-descent step produced parameters outside the model family."""


class ConfigError(MdirlError, ValueError):
    """Invalid experiment configuration; the message carries the field path."""


class InsufficientDataError(MdirlError, ValueError):
    """Too few records for a diagnostic."""
