"""Single-scattering Rayleigh skylight and a pixel-polarizer mosaic camera.

Geometry conventions:

- sky frame is East-North-Up, azimuth measured clockwise from North;
- the camera looks at the zenith through a zenith-centred equidistant fisheye, the image is
  rendered in map view (camera "up" points at azimuth `heading`, image right is 90 degrees
  clockwise from it);
- image x runs along increasing column, image y along decreasing row, AOP and analyzer
  angles are measured counter-clockwise from image x.

Every view direction is evaluated at the centre of its 2x2 super-pixel, so the four
analyzers of one super-pixel see the same sky point.
"""

from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from . import get_logger
from .exceptions import InvalidInputError
from .models import DEFAULT_PATTERN, CameraRig, MosaicImage, Pattern, SampleMeta, SunPosition
from .models.mosaic import analyzer_grid, frozen_array
from .models.sky import validate_pattern
from .repositories import DatasetRepository

logger = get_logger(__name__)

Array = npt.NDArray[np.float64]

HeadingSampler = Callable[[np.random.Generator], float]
SunSampler = Callable[[np.random.Generator], SunPosition]

# |view x sun| below this is treated as parallel
_PARALLEL_EPS = 1e-12


@dataclass(frozen=True)
class SkyStokesField:
    s0: Array
    dop: Array
    aop: Array
    inside: npt.NDArray[np.bool_]
    degenerate: npt.NDArray[np.bool_]

    def __post_init__(self):
        for name in ("s0", "dop", "aop", "inside", "degenerate"):
            frozen_array(getattr(self, name))

    @property
    def shape(self) -> tuple[int, int]:
        return self.s0.shape  # type: ignore[return-value]


class ViewDirection(NamedTuple):
    vector: Array
    inside: bool


def _geometry(rows, cols, rig: CameraRig):
    """Unit view vectors and sky-disc mask for pixel coordinates, which may be fractional."""
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64)

    dx = cols - (rig.width - 1) / 2.0
    dy = (rig.height - 1) / 2.0 - rows
    rho = np.hypot(dx, dy)
    rho_max = min(rig.width, rig.height) / 2.0

    theta = np.deg2rad(rig.fov) * rho / rho_max
    alpha = np.arctan2(dy, dx)
    azimuth = np.deg2rad(rig.heading + 90.0) - alpha

    sin_theta = np.sin(theta)
    vector = np.stack(
        [sin_theta * np.sin(azimuth), sin_theta * np.cos(azimuth), np.cos(theta)],
        axis=-1,
    )
    return vector, rho <= rho_max


def sun_vector(sun: SunPosition) -> Array:
    altitude, azimuth = np.deg2rad(sun.altitude), np.deg2rad(sun.azimuth)
    return np.array([
        np.cos(altitude) * np.sin(azimuth),
        np.cos(altitude) * np.cos(azimuth),
        np.sin(altitude),
    ])


def view_direction(pixel: tuple[float, float], rig: CameraRig) -> ViewDirection:
    row, col = pixel
    if not (-0.5 <= row <= rig.height - 0.5 and -0.5 <= col <= rig.width - 0.5):
        msg = f"pixel {pixel} outside a {rig.height}x{rig.width} image"
        raise InvalidInputError(msg)

    vector, inside = _geometry(row, col, rig)
    return ViewDirection(vector=vector, inside=bool(inside))


def scattering_angle(view, sun: SunPosition) -> Array:
    """Angle between view direction(s) and the sun, degrees in [0, 180]."""
    cosine = np.clip(np.asarray(view) @ sun_vector(sun), -1.0, 1.0)
    return np.rad2deg(np.arccos(cosine))


def rayleigh_dop(gamma, dop_max: float) -> Array:
    cos_sq = np.cos(np.deg2rad(gamma)) ** 2
    return dop_max * (1.0 - cos_sq) / (1.0 + cos_sq)


def wrap_aop(aop) -> Array:
    """Map angles in degrees onto (-90, 90]."""
    wrapped = np.mod(np.asarray(aop, dtype=np.float64) + 90.0, 180.0) - 90.0
    return np.where(wrapped <= -90.0, wrapped + 180.0, wrapped)


def rayleigh_aop(view, sun: SunPosition, rig: CameraRig) -> tuple[Array, Array]:
    """E-vector angle in the image frame and a mask of degenerate (sun-parallel) views.

    The E-vector is perpendicular to the scattering plane, i.e. along view x sun. It is
    decomposed onto the local image axes: the radial image direction maps to increasing
    zenith angle and the counter-clockwise tangential direction to decreasing azimuth.
    """
    view = np.asarray(view, dtype=np.float64)
    e_vector = np.cross(view, sun_vector(sun))
    norm = np.linalg.norm(e_vector, axis=-1)
    degenerate = norm < _PARALLEL_EPS

    vx, vy, vz = view[..., 0], view[..., 1], view[..., 2]
    horizontal = np.hypot(vx, vy)
    camera_up = np.deg2rad(rig.heading + 90.0)
    # at the zenith the polar angle is taken as 0, as it is for the centre pixel
    azimuth = np.where(horizontal > 0.0, np.arctan2(vx, vy), camera_up)
    alpha = camera_up - azimuth

    radial = np.stack(
        [vz * np.sin(azimuth), vz * np.cos(azimuth), -horizontal], axis=-1
    )
    tangential = np.stack(
        [-np.cos(azimuth), np.sin(azimuth), np.zeros_like(azimuth)], axis=-1
    )
    e_radial = np.sum(e_vector * radial, axis=-1)
    e_tangential = np.sum(e_vector * tangential, axis=-1)

    x = e_radial * np.cos(alpha) - e_tangential * np.sin(alpha)
    y = e_radial * np.sin(alpha) + e_tangential * np.cos(alpha)
    aop = wrap_aop(np.rad2deg(np.arctan2(y, x)))

    return np.where(degenerate, 0.0, aop), degenerate


def superpixel_centres(rig: CameraRig) -> tuple[Array, Array]:
    rows = 2 * (np.arange(rig.height) // 2) + 0.5
    cols = 2 * (np.arange(rig.width) // 2) + 0.5
    return np.meshgrid(rows, cols, indexing="ij")


def synthesize_field(rig: CameraRig, sun: SunPosition) -> SkyStokesField:
    rows, cols = superpixel_centres(rig)
    view, inside = _geometry(rows, cols, rig)

    gamma = scattering_angle(view, sun)
    aop, degenerate = rayleigh_aop(view, sun, rig)
    cos_sq = np.cos(np.deg2rad(gamma)) ** 2

    s0 = np.where(inside, (1.0 + cos_sq) / 2.0, 0.0)
    dop = np.where(inside, rayleigh_dop(gamma, rig.dop_max), 0.0)
    aop = np.where(inside, aop, 0.0)
    degenerate &= inside

    if degenerate.any():
        logger.debug("Degenerate AOP pixels", count=int(degenerate.sum()), sun=sun)

    return SkyStokesField(s0=s0, dop=dop, aop=aop, inside=inside, degenerate=degenerate)


def analyzer_response(s0, dop, aop, angle) -> Array:
    """Intensity behind a linear analyzer at `angle` degrees, before quantization."""
    return (
        np.asarray(s0)
        / 2.0
        * (1.0 + np.asarray(dop) * np.cos(2.0 * np.deg2rad(np.asarray(angle) - aop)))
    )


def synthesize_mosaic(
    field: SkyStokesField,
    pattern: Pattern = DEFAULT_PATTERN,
    noise_sigma: float = 0.005,
    rng: np.random.Generator | None = None,
    bit_depth: int = 12,
) -> MosaicImage:
    if noise_sigma < 0:
        msg = f"noise_sigma must be >= 0, got {noise_sigma}"
        raise InvalidInputError(msg)

    pattern = validate_pattern(pattern)
    height, width = field.shape
    intensity = analyzer_response(
        field.s0, field.dop, field.aop, analyzer_grid(pattern, height, width)
    )

    if noise_sigma > 0:
        if rng is None:
            msg = "a random generator is required when noise_sigma > 0"
            raise InvalidInputError(msg)
        intensity = intensity + rng.normal(0.0, noise_sigma, intensity.shape)

    maxval = 2**bit_depth - 1
    pixels = np.rint(np.clip(intensity, 0.0, 1.0) * maxval).astype(np.uint16)

    return MosaicImage(pixels=pixels, bit_depth=bit_depth, pattern=pattern)


def uniform_headings(grid_deg: float = 1.0) -> HeadingSampler:
    """Headings uniform on [0, 360), on a grid of `grid_deg` (0 for continuous)."""
    if grid_deg > 0:
        steps = round(360.0 / grid_deg)

        def on_grid(rng: np.random.Generator) -> float:
            return float(rng.integers(steps)) * grid_deg

        return on_grid

    def continuous(rng: np.random.Generator) -> float:
        return float(rng.uniform(0.0, 360.0))

    return continuous


def uniform_sun(
    altitude_min: float = 0.0,
    altitude_max: float = 60.0,
    azimuth: float | None = 0.0,
) -> SunSampler:
    """Solar altitude uniform in [altitude_min, altitude_max]; azimuth fixed, or
    uniform when `azimuth` is None."""
    if altitude_min > altitude_max:
        msg = f"sun altitude range is empty: [{altitude_min}, {altitude_max}]"
        raise InvalidInputError(msg)

    def sample(rng: np.random.Generator) -> SunPosition:
        altitude = float(rng.uniform(altitude_min, altitude_max))
        sun_azimuth = float(rng.uniform(0.0, 360.0)) if azimuth is None else azimuth
        return SunPosition(azimuth=sun_azimuth, altitude=altitude)

    return sample


def sample_seed(seed: int, index: int) -> int:
    """Independent 64-bit stream seed for sample `index` of a dataset seeded by `seed`."""
    state = np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def draw_meta(
    index: int,
    seed: int,
    heading_sampler: HeadingSampler,
    sun_sampler: SunSampler,
    rig: CameraRig,
    noise_sigma: float,
    bit_depth: int = 12,
    pattern: Pattern = DEFAULT_PATTERN,
) -> SampleMeta:
    rng_seed = sample_seed(seed, index)
    label_rng = np.random.default_rng([rng_seed, 0])
    heading = heading_sampler(label_rng)
    sun = sun_sampler(label_rng)

    return SampleMeta(
        index=index,
        heading_deg=heading,
        sun_azimuth_deg=sun.azimuth,
        sun_altitude_deg=sun.altitude,
        dop_max=rig.dop_max,
        noise_sigma=noise_sigma,
        rng_seed=rng_seed,
        bit_depth=bit_depth,
        pattern=pattern,
        fov_deg=rig.fov,
        width=rig.width,
        height=rig.height,
    )


def render_sample(meta: SampleMeta) -> MosaicImage:
    """Regenerate the mosaic described by `meta`, bit-for-bit."""
    noise_rng = np.random.default_rng([meta.rng_seed, 1])
    field = synthesize_field(meta.rig, meta.sun)
    return synthesize_mosaic(
        field,
        pattern=meta.pattern,
        noise_sigma=meta.noise_sigma,
        rng=noise_rng,
        bit_depth=meta.bit_depth,
    )


def generate_dataset(
    count: int,
    out_dir: Path,
    seed: int = 0,
    heading_sampler: HeadingSampler | None = None,
    sun_sampler: SunSampler | None = None,
    noise_sigma: float = 0.005,
    rig: CameraRig | None = None,
    bit_depth: int = 12,
    pattern: Pattern = DEFAULT_PATTERN,
) -> list[str]:
    """Write `count` labelled mosaics and their manifest under `out_dir`.

    Returns the manifest, the list of sample basenames. On failure every file written by
    this call is removed again before the error propagates.
    """
    if count < 0:
        msg = f"count must be >= 0, got {count}"
        raise InvalidInputError(msg)

    rig = rig or CameraRig()
    heading_sampler = heading_sampler or uniform_headings()
    sun_sampler = sun_sampler or uniform_sun()

    repo = DatasetRepository(root=Path(out_dir))
    logger.info("Generating dataset", count=count, seed=seed, root=str(repo.root))

    written: list[str] = []
    try:
        repo.root.mkdir(parents=True, exist_ok=True)
        for index in range(count):
            meta = draw_meta(
                index,
                seed,
                heading_sampler,
                sun_sampler,
                rig,
                noise_sigma,
                bit_depth,
                pattern,
            )
            written.append(meta.basename)
            repo.insert(meta, render_sample(meta))
            logger.debug("Wrote sample", basename=meta.basename, heading=meta.heading_deg)
        repo.write_manifest(written)
    except OSError:
        logger.exception("Dataset generation failed, cleaning up", written=len(written))
        repo.remove(written, manifest=True)
        raise

    logger.info("Generated dataset", count=count, root=str(repo.root))
    return written
