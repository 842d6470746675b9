"""Exception types shared across the toolkit.

Every error the CLI can surface maps to one of these classes so that exit
codes stay stable (see cli.EXIT_CODES).
"""


class SdtSegError(Exception):
    """Base class for all toolkit errors."""


class GeometryError(SdtSegError):
    """Shape or spacing mismatch between grids that must agree."""


class DegenerateInputError(SdtSegError):
    """Input outside an operation's domain: constant volume, empty or
    all-foreground mask, and similar."""


class ConfigError(SdtSegError):
    """Invalid, unknown, or out-of-range configuration values."""


class TrainingDivergedError(SdtSegError):
    """Non-finite loss encountered during optimization."""


class NiftiError(SdtSegError):
    """Base class for volume file I/O failures."""


class MalformedHeaderError(NiftiError):
    """Header does not parse as NIfTI-1 (bad magic, bad size, bad fields)."""


class UnsupportedNiftiError(NiftiError):
    """Valid NIfTI-1, but outside the supported subset (datatype, scaling,
    two-file variant, byte order)."""


class WrongDimensionError(NiftiError):
    """Image is not a single 3D frame."""
