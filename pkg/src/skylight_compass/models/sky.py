from typing import Annotated

from pydantic import Field, field_validator

from .base import Base

Pattern = tuple[tuple[int, int], tuple[int, int]]

DEFAULT_PATTERN: Pattern = ((90, 45), (135, 0))
ANALYZER_ANGLES = (0, 45, 90, 135)


def wrap360(value: float) -> float:
    wrapped = float(value) % 360.0
    # tiny negatives round up to exactly 360
    return 0.0 if wrapped >= 360.0 else wrapped


def validate_pattern(pattern: Pattern) -> Pattern:
    pattern = (
        (int(pattern[0][0]), int(pattern[0][1])),
        (int(pattern[1][0]), int(pattern[1][1])),
    )
    if sorted(angle for row in pattern for angle in row) != list(ANALYZER_ANGLES):
        msg = f"polarizer pattern must be a permutation of {ANALYZER_ANGLES}, got {pattern}"
        raise ValueError(msg)
    return pattern


class SunPosition(Base):
    azimuth: float
    altitude: Annotated[float, Field(ge=-90, le=90)]

    @field_validator("azimuth")
    @classmethod
    def _wrap_azimuth(cls, v: float) -> float:
        return wrap360(v)


class CameraRig(Base):
    heading: float = 0.0
    width: Annotated[int, Field(gt=0)] = 64
    height: Annotated[int, Field(gt=0)] = 64
    fov: Annotated[float, Field(gt=0, le=180)] = 90.0
    dop_max: Annotated[float, Field(gt=0, le=1)] = 0.8

    @field_validator("heading")
    @classmethod
    def _wrap_heading(cls, v: float) -> float:
        return wrap360(v)

    @field_validator("width", "height")
    @classmethod
    def _even(cls, v: int) -> int:
        if v % 2:
            msg = f"mosaic dimensions must be even, got {v}"
            raise ValueError(msg)
        return v

    def with_heading(self, heading: float) -> "CameraRig":
        return self.model_copy(update={"heading": wrap360(heading)})


class SampleMeta(Base):
    """Everything needed to regenerate one sample bit-for-bit. Field names are the
    sidecar keys."""

    index: Annotated[int, Field(ge=0)]
    heading_deg: float
    sun_azimuth_deg: float
    sun_altitude_deg: Annotated[float, Field(ge=-90, le=90)]
    dop_max: Annotated[float, Field(gt=0, le=1)]
    noise_sigma: Annotated[float, Field(ge=0)]
    rng_seed: Annotated[int, Field(ge=0, lt=2**64)]
    bit_depth: Annotated[int, Field(ge=1, le=16)] = 12
    pattern: Pattern = DEFAULT_PATTERN
    fov_deg: Annotated[float, Field(gt=0, le=180)] = 90.0
    width: Annotated[int, Field(gt=0)] = 64
    height: Annotated[int, Field(gt=0)] = 64

    @field_validator("pattern")
    @classmethod
    def _check_pattern(cls, v: Pattern) -> Pattern:
        return validate_pattern(v)

    @field_validator("heading_deg", "sun_azimuth_deg")
    @classmethod
    def _wrap_angles(cls, v: float) -> float:
        return wrap360(v)

    @property
    def basename(self) -> str:
        return f"sample_{self.index:06d}"

    @property
    def sun(self) -> SunPosition:
        return SunPosition(azimuth=self.sun_azimuth_deg, altitude=self.sun_altitude_deg)

    @property
    def rig(self) -> CameraRig:
        return CameraRig(
            heading=self.heading_deg,
            width=self.width,
            height=self.height,
            fov=self.fov_deg,
            dop_max=self.dop_max,
        )
