"""Exception types shared across the vmpc package."""


class VmpcError(Exception):
    """Base class for all vmpc errors."""


class ModelFormatError(VmpcError):
    """A scenario model file is malformed (missing or unparseable field)."""


class ModelValidationError(VmpcError):
    """A model or distribution violates a structural invariant."""


class ConfigError(VmpcError):
    """A simulation configuration violates its invariants."""


class DegenerateFitError(VmpcError):
    """Samples are degenerate (e.g. all equal) for a shape-family fit."""


class InsufficientDataError(VmpcError):
    """Too few samples or bins to run the requested fit or test."""


class UnsupportedFamilyError(VmpcError):
    """The distribution family is not supported by this operation."""


class GridOverflowError(VmpcError):
    """An MPC delay falls outside the configured delay grid."""


class UndefinedLossError(VmpcError):
    """Power loss is undefined because the captured energy is zero."""


class NoLosTrackError(VmpcError):
    """No line-of-sight track could be identified."""


class FileParseError(VmpcError):
    """A binary or structured-text artifact file failed to parse."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
