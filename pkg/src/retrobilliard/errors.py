"""Exception types shared across the package."""


class RetroError(Exception):
    """Base class for all package errors."""


class DomainError(RetroError, ValueError):
    """A parameter lies outside the domain where the object is defined."""


class ConfigError(RetroError, ValueError):
    """Parameters are individually valid but do not fit together."""


class WeightError(RetroError, ValueError):
    """Decomposition weights do not sum to one."""


class EmptyMeasure(RetroError, ValueError):
    """A functional was requested on a measure with no samples."""


class RunFlagged(RetroError):
    """Too many trajectories were excluded as pathological."""

    def __init__(self, message, fraction=None):
        super().__init__(message)
        self.fraction = fraction


class CapExceeded(RetroError):
    """An iteration hit its cap before the stopping rule fired."""


class Degenerate(RetroError, ValueError):
    """Input lies on a parity boundary where the answer is undefined."""


class NoInteraction(RetroError):
    """The ray never reached the boundary."""


class OutputError(RetroError, OSError):
    """An output file or directory could not be written."""
