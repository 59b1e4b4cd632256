"""Mosaic to feature tensor: demosaic, mean-pool, Stokes, DOP and AOP."""

from collections.abc import Sequence
from dataclasses import dataclass
from functools import singledispatch

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view

from . import get_logger
from .exceptions import InvalidInputError, ShapeMismatchError
from .models import MosaicImage
from .models.mosaic import frozen_array
from .models.sky import ANALYZER_ANGLES
from .skysim import wrap_aop

logger = get_logger(__name__)

Array = npt.NDArray[np.float64]

# s0 below this counts as dark, in normalized units
EPS = 1e-9
# largest possible s0 for channels normalized to [0, 1]
S0_MAX = 2.0


@dataclass(frozen=True)
class IntensityChannels:
    i0: Array
    i45: Array
    i90: Array
    i135: Array

    def __post_init__(self):
        shapes = {channel.shape for channel in self.as_tuple()}
        if len(shapes) != 1:
            msg = f"intensity channels differ in shape: {sorted(shapes)}"
            raise ShapeMismatchError(msg)
        for channel in self.as_tuple():
            frozen_array(channel)

    def as_tuple(self) -> tuple[Array, Array, Array, Array]:
        return self.i0, self.i45, self.i90, self.i135

    @property
    def shape(self) -> tuple[int, ...]:
        return self.i0.shape


@dataclass(frozen=True)
class StokesMaps:
    s0: Array
    s1: Array
    s2: Array

    def __post_init__(self):
        for stokes_map in (self.s0, self.s1, self.s2):
            frozen_array(stokes_map)

    @property
    def dop_raw(self) -> Array:
        """Unclamped DOP, sensor noise can push it above 1."""
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = np.hypot(self.s1, self.s2) / self.s0
        return np.where(self.s0 > EPS, raw, 0.0)


@dataclass(frozen=True)
class PolarizationMaps:
    dop: Array
    aop: Array
    degenerate: npt.NDArray[np.bool_]

    def __post_init__(self):
        for pol_map in (self.dop, self.aop, self.degenerate):
            frozen_array(pol_map)


@dataclass(frozen=True)
class FeatureTensor:
    """(s0 / 2, dop, (aop + 90) / 180) stacked in that order, shape (3, grid_h, grid_w)."""

    values: Array

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[0] != 3:
            msg = f"feature tensor must have shape (3, h, w), got {self.values.shape}"
            raise ShapeMismatchError(msg)
        frozen_array(self.values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def grid(self) -> tuple[int, int]:
        return self.values.shape[1], self.values.shape[2]

    @property
    def s0(self) -> Array:
        return self.values[0]

    @property
    def dop(self) -> Array:
        return self.values[1]

    @property
    def aop(self) -> Array:
        return self.values[2]


def demosaic_kernels(pattern) -> npt.NDArray[np.float64]:
    """One-hot 2x2 kernels, one per analyzer angle in 0/45/90/135 order."""
    kernels = np.zeros((len(ANALYZER_ANGLES), 2, 2))
    for dr in (0, 1):
        for dc in (0, 1):
            kernels[ANALYZER_ANGLES.index(pattern[dr][dc]), dr, dc] = 1.0
    return kernels


def demosaic(mosaic: MosaicImage) -> IntensityChannels:
    """Stride-2 convolution of the mosaic with fixed one-hot kernels, so each channel
    picks its analyzer's pixel out of every super-pixel."""
    height, width = mosaic.pixels.shape
    if height % 2 or width % 2:
        msg = f"mosaic dimensions must be even, got {height}x{width}"
        raise InvalidInputError(msg)

    scaled = mosaic.pixels.astype(np.float64) / mosaic.maxval
    blocks = sliding_window_view(scaled, (2, 2))[::2, ::2]
    channels = np.einsum("rcij,kij->krc", blocks, demosaic_kernels(mosaic.pattern))

    return IntensityChannels(*(np.ascontiguousarray(c) for c in channels))


@singledispatch
def mean_pool(maps, pool_size: int):
    """Mean over non-overlapping pool_size x pool_size blocks of the last two axes.
    Trailing rows and columns that do not fill a block are dropped."""
    maps = np.asarray(maps, dtype=np.float64)
    if pool_size <= 0:
        msg = f"pool_size must be positive, got {pool_size}"
        raise InvalidInputError(msg)
    if pool_size == 1:
        return maps.copy()

    height, width = maps.shape[-2:]
    rows, cols = height // pool_size, width // pool_size
    if rows == 0 or cols == 0:
        msg = f"pool_size {pool_size} exceeds map size {height}x{width}"
        raise InvalidInputError(msg)

    cropped = maps[..., : rows * pool_size, : cols * pool_size]
    blocks = cropped.reshape(*maps.shape[:-2], rows, pool_size, cols, pool_size)
    return blocks.mean(axis=(-3, -1))


@mean_pool.register
def _(maps: IntensityChannels, pool_size: int) -> IntensityChannels:
    return IntensityChannels(*(mean_pool(c, pool_size) for c in maps.as_tuple()))


@mean_pool.register
def _(maps: StokesMaps, pool_size: int) -> StokesMaps:
    return StokesMaps(*(mean_pool(m, pool_size) for m in (maps.s0, maps.s1, maps.s2)))


def stokes(channels: IntensityChannels) -> StokesMaps:
    if channels.i0.size == 0:
        msg = "intensity channels are empty"
        raise InvalidInputError(msg)

    return StokesMaps(
        s0=(channels.i0 + channels.i45 + channels.i90 + channels.i135) / 2.0,
        s1=channels.i0 - channels.i90,
        s2=channels.i45 - channels.i135,
    )


def dop(maps: StokesMaps) -> Array:
    return np.clip(maps.dop_raw, 0.0, 1.0)


def aop(maps: StokesMaps) -> tuple[Array, npt.NDArray[np.bool_]]:
    """Half the two-argument arctangent of (s2, s1) in degrees on (-90, 90], with a mask
    of pixels where it is undefined (s1 = s2 = 0, or dark)."""
    degenerate = ((maps.s1 == 0) & (maps.s2 == 0)) | (maps.s0 <= EPS)
    angle = wrap_aop(np.rad2deg(0.5 * np.arctan2(maps.s2, maps.s1)))
    return np.where(degenerate, 0.0, angle), degenerate


def polarization(maps: StokesMaps) -> PolarizationMaps:
    angle, degenerate = aop(maps)
    return PolarizationMaps(dop=dop(maps), aop=angle, degenerate=degenerate)


def build_feature_tensor(
    maps: StokesMaps, pol: PolarizationMaps, pool_size: int = 1
) -> FeatureTensor:
    if not (maps.s0.shape == pol.dop.shape == pol.aop.shape):
        msg = f"stokes {maps.s0.shape} and polarization {pol.dop.shape} maps differ"
        raise ShapeMismatchError(msg)

    stacked = np.stack([maps.s0 / S0_MAX, pol.dop, (pol.aop + 90.0) / 180.0])
    return FeatureTensor(np.clip(mean_pool(stacked, pool_size), 0.0, 1.0))


def extract_features(mosaic: MosaicImage, pool_size: int) -> FeatureTensor:
    """demosaic -> mean_pool -> stokes -> dop/aop -> normalized feature stack.

    Pooling happens on the intensity channels, before the non-linear DOP and AOP."""
    maps = stokes(mean_pool(demosaic(mosaic), pool_size))
    return build_feature_tensor(maps, polarization(maps))


def feature_batch(mosaics: Sequence[MosaicImage], pool_size: int) -> Array:
    if not mosaics:
        return np.zeros((0, 3, 0, 0))
    return np.stack([extract_features(m, pool_size).values for m in mosaics])
