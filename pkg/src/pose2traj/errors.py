"""Exception hierarchy shared across the package.

Every error carries an ``exit_code`` so the CLI can map failures onto the
documented process exit statuses without a lookup table.
"""


class Pose2TrajError(Exception):
    exit_code = 1


class InputError(Pose2TrajError):
    """Bad input data or schema (exit status 2)."""

    exit_code = 2


class NumericError(Pose2TrajError):
    """Diverged or non-finite computation (exit status 3)."""

    exit_code = 3


class MissingArtifact(Pose2TrajError):
    """A required file or checkpoint is absent (exit status 4)."""

    exit_code = 4


# autodiff
class ShapeMismatch(InputError):
    pass


class UnknownPrimitive(Pose2TrajError):
    pass


class NonScalarLoss(Pose2TrajError):
    pass


class DisconnectedGraph(Pose2TrajError):
    pass


class MissingGradient(Pose2TrajError):
    pass


# data pipeline
class SchemaError(InputError):
    pass


class NonMonotoneFrames(InputError):
    pass


class InsufficientContext(InputError):
    pass


class SingularFit(NumericError):
    pass


class MissingBall(InputError):
    pass


class MissingJoint(InputError):
    pass


class SeriesTooShort(InputError):
    pass


class InvalidParams(InputError):
    pass


class LengthMismatch(InputError):
    pass


class EmptySequence(InputError):
    pass


# model / training
class InvalidConfig(InputError):
    pass


class EmptyDataset(InputError):
    pass


class DivergedLoss(NumericError):
    def __init__(self, message: str, batch_index: int):
        super().__init__(message)
        self.batch_index = batch_index


class BadMagic(InputError):
    pass


class VersionMismatch(InputError):
    pass


class TruncatedPayload(InputError):
    pass


class ShapeDirectoryMismatch(InputError):
    pass


class HistoryTooShort(InputError):
    pass


class MissingCheckpoint(MissingArtifact):
    pass
