from dataclasses import dataclass, field
from typing import Annotated, Literal

from pydantic import Field, PositiveInt

from ..exceptions import ShapeMismatchError
from .base import Base
from .encoding import EncodingSpec, Scheme
from .metrics import MetricsSummary

BRANCHES = ("s0", "dop", "aop")


class NetworkConfig(Base):
    grid_h: PositiveInt = 8
    grid_w: PositiveInt = 8
    pool_size: PositiveInt = 4
    branch_hidden: tuple[PositiveInt, PositiveInt] = (128, 64)
    fusion_hidden: PositiveInt = 256
    output_size: PositiveInt = 360
    output_activation: Literal["sigmoid", "linear"] = "sigmoid"
    dtype: Literal["float64", "float32"] = "float64"

    @classmethod
    def for_spec(cls, spec: EncodingSpec, **kwargs) -> "NetworkConfig":
        activation = "linear" if spec.scheme is Scheme.RAW_0_360 else "sigmoid"
        return cls(output_size=spec.size, output_activation=activation, **kwargs)

    @property
    def grid_cells(self) -> int:
        return self.grid_h * self.grid_w

    @property
    def mosaic_shape(self) -> tuple[int, int]:
        """Nominal (height, width) of the raw mosaic, larger ones lose their remainder."""
        return 2 * self.pool_size * self.grid_h, 2 * self.pool_size * self.grid_w

    def grid_for(self, mosaic_shape: tuple[int, int]) -> tuple[int, int]:
        """Feature grid produced by a mosaic of this shape at this pool size."""
        height, width = mosaic_shape
        return (height // 2) // self.pool_size, (width // 2) // self.pool_size

    def check_mosaic(self, mosaic_shape: tuple[int, int]) -> None:
        if self.grid_for(mosaic_shape) != (self.grid_h, self.grid_w):
            msg = (
                f"a {mosaic_shape[0]}x{mosaic_shape[1]} mosaic pools to a "
                f"{self.grid_for(mosaic_shape)} grid, network expects {(self.grid_h, self.grid_w)}"
            )
            raise ShapeMismatchError(msg)

    def layer_shapes(self) -> dict[str, tuple[int, int]]:
        """(fan_in, fan_out) per layer in the fixed checkpoint order."""
        first, second = self.branch_hidden
        shapes: dict[str, tuple[int, int]] = {}
        for branch in BRANCHES:
            shapes[f"{branch}.0"] = (self.grid_cells, first)
            shapes[f"{branch}.1"] = (first, second)
        shapes["fusion.0"] = (len(BRANCHES) * second, self.fusion_hidden)
        shapes["fusion.1"] = (self.fusion_hidden, self.fusion_hidden)
        shapes["output"] = (self.fusion_hidden, self.output_size)
        return shapes

    def check_spec(self, spec: EncodingSpec) -> None:
        if self.output_size != spec.size:
            msg = (
                f"network output size {self.output_size} does not match encoding "
                f"{spec.scheme.value} with j={spec.j} (size {spec.size})"
            )
            raise ShapeMismatchError(msg)


class TrainConfig(Base):
    # 0 is accepted so a null training run is expressible
    learning_rate: Annotated[float, Field(ge=0)] = 1e-3
    beta1: Annotated[float, Field(ge=0, lt=1)] = 0.9
    beta2: Annotated[float, Field(ge=0, lt=1)] = 0.999
    epsilon: Annotated[float, Field(gt=0)] = 1e-8
    batch_size: PositiveInt = 32
    epochs: Annotated[int, Field(ge=0)] = 60
    seed: Annotated[int, Field(ge=0)] = 0
    spec: EncodingSpec = EncodingSpec()


@dataclass
class TrainReport:
    epoch_loss: list[float] = field(default_factory=list)
    # wall clock is not part of equality, reruns must compare equal
    epoch_seconds: list[float] = field(default_factory=list, compare=False)
    validation: dict[str, MetricsSummary] | None = None

    @property
    def epochs(self) -> int:
        return len(self.epoch_loss)
