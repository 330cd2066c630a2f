"""Exception types shared across the package."""


class GridNavError(Exception):
    """Base class for all package errors."""


class OutOfBoundsError(GridNavError):
    """A pose or cell index falls outside the grid."""


class ConfigError(GridNavError):
    """Invalid or inconsistent run configuration."""


class FixtureError(GridNavError):
    """A replay fixture required for a query is missing."""


class TransportError(GridNavError):
    """The remote perception endpoint could not be reached."""


class DecompositionError(GridNavError):
    """A remote decomposition reply could not be parsed."""

    def __init__(self, message, raw_reply=None):
        super().__init__(message)
        self.raw_reply = raw_reply


class UnreachableGoalError(GridNavError):
    """The requested waypoint is occupied after obstacle inflation."""
