import os
from typing import Literal

from pydantic import BaseModel, Field, PositiveInt
from pydantic_settings import BaseSettings, SettingsConfigDict

from . import get_logger

logger = get_logger(__name__)

settings: "Settings" = None  # type: ignore[assignment]


def configure():
    global settings
    skyc_dotenv_file = os.getenv("SKYC_DOTENV_FILE", None)
    logger.debug("Configuring settings", skyc_dotenv_file=skyc_dotenv_file)
    settings = Settings(_env_file=skyc_dotenv_file)  # type: ignore[call-arg]
    return settings


class Sky(BaseModel):
    """Camera, sky and dataset sampling defaults. Desk scale, not the size of any real
    polarization camera."""

    width: PositiveInt = 64
    height: PositiveInt = 64
    fov_deg: float = Field(default=90.0, gt=0, le=180)
    dop_max: float = Field(default=0.8, gt=0, le=1)
    noise_sigma: float = Field(default=0.005, ge=0)
    bit_depth: int = Field(default=12, ge=1, le=16)
    pattern: tuple[tuple[int, int], tuple[int, int]] = ((90, 45), (135, 0))

    sun_altitude_min_deg: float = Field(default=0.0, ge=-90, le=90)
    sun_altitude_max_deg: float = Field(default=60.0, ge=-90, le=90)
    # None samples the solar azimuth uniformly, which makes heading unlearnable
    sun_azimuth_deg: float | None = 0.0
    heading_grid_deg: float = Field(default=1.0, ge=0)


class Polarimetry(BaseModel):
    pool_size: PositiveInt = 4


class Encoding(BaseModel):
    scheme: Literal["raw360", "norm01", "onehot", "trig", "exp"] = "exp"
    j: float = Field(default=1.0, gt=0)
    m: float = Field(default=0.98, gt=0, lt=1)


class Network(BaseModel):
    branch_hidden: tuple[PositiveInt, PositiveInt] = (128, 64)
    fusion_hidden: PositiveInt = 256
    dtype: Literal["float64", "float32"] = "float64"


class Train(BaseModel):
    learning_rate: float = Field(default=1e-3, ge=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)
    batch_size: PositiveInt = 32
    epochs: int = Field(default=60, ge=0)
    seed: int = Field(default=0, ge=0)


class Harness(BaseModel):
    ambiguity_window_deg: tuple[float, float] = (170.0, 190.0)
    mode: Literal["wrapped360", "folded180"] = "folded180"
    workers: PositiveInt = 1


class Settings(BaseSettings):
    debug: bool = False
    log_level: str = "info"

    sky: Sky = Sky()
    polarimetry: Polarimetry = Polarimetry()
    encoding: Encoding = Encoding()
    network: Network = Network()
    train: Train = Train()
    harness: Harness = Harness()

    model_config = SettingsConfigDict(
        env_prefix="SKYC_",
        env_file=[".env"],
        env_nested_delimiter="__",
    )
