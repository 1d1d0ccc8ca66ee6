"""Exception taxonomy shared across the package."""


class AffordanceError(Exception):
    """Base class for all domain errors."""


class InvalidPoseError(AffordanceError):
    """Pose violates the joint schema or has a degenerate bounding box."""


class InvalidScaleError(AffordanceError):
    """Scale factor is zero or negative."""


class EmptyInputError(AffordanceError):
    """An operation that needs at least one item received none."""


class InvalidKError(AffordanceError):
    """Requested cluster count is outside [1, n_samples]."""


class ShapeError(AffordanceError):
    """Array dimensions do not match what the operation expects."""


class StateError(AffordanceError):
    """Operation called before its prerequisite step (missing cache, untrained model)."""


class InvalidLabelError(AffordanceError):
    """Class label outside the valid id range."""


class TrainingDivergedError(AffordanceError):
    """Loss or parameters became NaN/Inf during training."""


class OutOfBoundsError(AffordanceError):
    """Query point lies outside the image."""


class InvalidFeatureError(AffordanceError):
    """Feature vector is unusable (zero norm, wrong size)."""


class IncompleteScoringError(AffordanceError):
    """A frame is missing one of the required detector scores."""


class DatasetFormatError(AffordanceError):
    """Dataset file failed to parse. Carries the 1-based offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class InvalidSplitError(AffordanceError):
    """Requested test show is not present in the records."""


class UndefinedPrecisionError(AffordanceError):
    """Precision/recall is undefined because labels contain a single class."""


class CheckpointFormatError(AffordanceError):
    """Parameter checkpoint failed to parse or its checksum does not match."""


class MissingArtifactError(AffordanceError):
    """A pipeline stage needs an artifact another command produces first."""


class TransitionError(AffordanceError):
    """Illegal annotation status transition."""
