from typing import TYPE_CHECKING, ClassVar

if TYPE_CHECKING:  # pragma: no cover
    from .models import TrainReport


class SkylightCompassError(Exception):
    """Base exception class for application. Should be subclassed with a more
    descriptive name.

    Carries an `exit_code` since the primary entrypoint is the command line: 2 for
    usage/input errors, 3 for runtime/numeric failures.
    """

    code: ClassVar[str] = "runtime_error"
    exit_code: ClassVar[int] = 3

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

    def as_dict(self) -> dict[str, str | int]:
        return {"msg": self.detail, "code": self.code, "exit_code": self.exit_code}


class InvalidInputError(SkylightCompassError, ValueError):
    code = "invalid_input"
    exit_code = 2


class DatasetError(SkylightCompassError):
    code = "dataset_error"
    exit_code = 2


class ShapeMismatchError(SkylightCompassError, ValueError):
    code = "shape_mismatch"


class TrainingDivergedError(SkylightCompassError):
    code = "training_diverged"

    def __init__(self, detail: str, report: "TrainReport"):
        super().__init__(detail)
        self.report = report


class CheckpointError(SkylightCompassError):
    code = "checkpoint_error"


class CheckpointVersionError(CheckpointError):
    code = "checkpoint_version"


class CheckpointShapeError(CheckpointError, ShapeMismatchError):
    code = "checkpoint_shape"


class CheckpointCorruptError(CheckpointError):
    code = "checkpoint_corrupt"


class CheckpointSpecError(CheckpointError):
    code = "checkpoint_spec"
