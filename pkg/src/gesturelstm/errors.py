"""Exception hierarchy shared by every module in the package."""


class GestureError(Exception):
    """Base class for all errors raised by this package."""


class MissingPoint(GestureError):
    """A hand frame lacks one of the 21 required points."""


class NonFiniteCoordinate(GestureError):
    """A hand frame contains a NaN or infinite coordinate."""


class DegenerateBone(GestureError):
    """A bone or finger-direction vector is too short to define an angle."""


class EmptySequence(GestureError):
    """A sequence with zero frames where at least one is required."""


class TrackTooShort(GestureError):
    """A feature track is shorter than the smoothing window."""


class BadFilterParams(GestureError):
    """Smoothing window/order combination is invalid."""


class PlanMismatch(GestureError):
    """A sample plan was built over a different raw length than the input."""


class ShapeMismatch(GestureError):
    """Array shapes are inconsistent with the model dimensions."""


class BadLabel(GestureError):
    """A class label is outside the model's valid range."""


class MalformedFrame(GestureError):
    """A dataset file contains a frame line that cannot be parsed."""


class MissingListFile(GestureError):
    """A dataset root lacks the expected train/test index file."""


class BadHeader(GestureError):
    """A capture or checkpoint file has an unrecognized header."""


class DimMismatch(GestureError):
    """Checkpoint dimensions do not match the dataset being evaluated."""


class EmptyTestSet(GestureError):
    """Evaluation was requested on an empty test set."""


class NanLoss(GestureError):
    """Training loss became NaN."""

    def __init__(self, iteration: int):
        super().__init__(f"loss became NaN at iteration {iteration}")
        self.iteration = iteration
