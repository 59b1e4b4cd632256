import enum
from typing import Annotated

from pydantic import Field, field_validator, model_validator

from .base import Base
from .sky import wrap360


class Scheme(enum.StrEnum):
    """Orientation output encodings. Values are the command-line tokens."""

    RAW_0_360 = "raw360"
    NORM_0_1 = "norm01"
    ONE_HOT = "onehot"
    TRIG = "trig"
    EXP = "exp"

    @property
    def is_vector(self) -> bool:
        return self not in {Scheme.RAW_0_360, Scheme.NORM_0_1}


class OrientationDeg(Base):
    value: float

    @field_validator("value")
    @classmethod
    def _wrap(cls, v: float) -> float:
        return wrap360(v)

    def __float__(self) -> float:
        return self.value


class EncodingSpec(Base):
    scheme: Scheme = Scheme.EXP
    j: Annotated[float, Field(gt=0, le=360)] = 1.0
    m: Annotated[float, Field(gt=0, lt=1)] = 0.98

    @model_validator(mode="after")
    def _check_neuron_count(self) -> "EncodingSpec":
        count = round(360.0 / self.j)
        if count < 1 or abs(count * self.j - 360.0) > 1e-9 * 360.0:
            msg = f"360/j must be a positive integer, got j={self.j}"
            raise ValueError(msg)
        return self

    @property
    def neurons(self) -> int:
        """Neuron count of the angular grid, 360/j."""
        return round(360.0 / self.j)

    @property
    def size(self) -> int:
        """Length of a code vector under this spec."""
        return self.neurons if self.scheme.is_vector else 1
