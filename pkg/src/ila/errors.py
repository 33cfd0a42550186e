"""Exception types shared across the package."""


class IlaError(Exception):
    """Base class for all package errors."""


class InvalidInputError(IlaError, ValueError):
    """Malformed or inconsistent arguments (dimension mismatch, bad ranges)."""


class ConfigError(IlaError, ValueError):
    """Scenario or selection configuration rejected; message names the key."""


class BehindCameraError(IlaError):
    """Point at or behind the projection depth floor."""


class DegenerateGeometryError(IlaError):
    """Measurement geometry too degenerate to map into state space."""


class UninformativeLandmarkError(IlaError):
    """Vision landmark with zero intensity gradient; carries no information."""


class EstimationFailure(IlaError):
    """State estimation diverged; caller should fall back to the motion mean."""


class InfeasibleSelectionError(IlaError):
    """Count constraints cannot be satisfied by any subset."""


class InstanceTooLargeError(IlaError):
    """Exhaustive enumeration refused beyond its size cap."""
