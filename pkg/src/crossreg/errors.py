"""Exception taxonomy shared by all pipeline stages."""

from __future__ import annotations


class CrossRegError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(CrossRegError, ValueError):
    """An argument violates a documented precondition."""


class PatchTooSparseError(CrossRegError):
    """A keypoint patch has fewer neighbors than the configured minimum."""


class DegeneratePatchError(CrossRegError):
    """Patch covariance has rank < 2; no stable local frame exists."""


class ZeroPatchError(CrossRegError):
    """A voxel grid with zero total mass cannot be normalized."""


class NoDescriptorsError(CrossRegError):
    """Every keypoint was dropped during description."""


class TooFewCorrespondencesError(CrossRegError):
    """Consistency filtering needs at least two correspondences."""


class EstimationDegenerateError(CrossRegError):
    """Correspondence geometry does not constrain a rigid transform."""


class EstimationFailedError(CrossRegError):
    """No acceptable transform hypothesis was found."""


class SpecTooAggressiveError(CrossRegError):
    """A synthetic pair spec destroyed too much of the cloud."""


class ConfigError(CrossRegError, ValueError):
    """A config file, flag, or field value is invalid."""


class PlyParseError(CrossRegError):
    """A PLY file is malformed; `offset` is the byte position of the defect."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class RegistrationFailedError(CrossRegError):
    """A pipeline stage failed; carries the stage name and partial results."""

    def __init__(self, stage: str, cause: Exception, trace=None):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.trace = trace
