import numpy as np
import pytest

from skylight_compass.exceptions import InvalidInputError
from skylight_compass.models import MosaicImage, SunPosition
from skylight_compass.polarimg import (
    IntensityChannels,
    StokesMaps,
    aop,
    build_feature_tensor,
    demosaic,
    dop,
    extract_features,
    mean_pool,
    polarization,
    stokes,
)
from skylight_compass.skysim import analyzer_response, synthesize_field, synthesize_mosaic


def channels_from(i0, i45, i90, i135):
    return IntensityChannels(
        *(np.atleast_2d(np.asarray(v, dtype=np.float64)) for v in (i0, i45, i90, i135))
    )


def stokes_from(s0, s1, s2):
    return StokesMaps(*(np.atleast_2d(np.asarray(v, dtype=np.float64)) for v in (s0, s1, s2)))


def test_demosaic_constant_mosaic():
    mosaic = MosaicImage(pixels=np.full((8, 8), 1000, dtype=np.uint16))

    channels = demosaic(mosaic)

    for channel in channels.as_tuple():
        assert channel.shape == (4, 4)
        np.testing.assert_array_equal(channel, 1000 / 4095)


def test_demosaic_single_superpixel():
    # default pattern ((90, 45), (135, 0))
    mosaic = MosaicImage(pixels=np.array([[90, 45], [135, 0]], dtype=np.uint16))

    channels = demosaic(mosaic)

    assert channels.i0[0, 0] == 0.0
    assert channels.i45[0, 0] == 45 / 4095
    assert channels.i90[0, 0] == 90 / 4095
    assert channels.i135[0, 0] == 135 / 4095


def test_demosaic_follows_pattern():
    pixels = np.arange(16, dtype=np.uint16).reshape(4, 4)
    mosaic = MosaicImage(pixels=pixels, bit_depth=4, pattern=((0, 45), (135, 90)))

    channels = demosaic(mosaic)

    np.testing.assert_array_equal(channels.i0, pixels[0::2, 0::2] / 15)
    np.testing.assert_array_equal(channels.i45, pixels[0::2, 1::2] / 15)
    np.testing.assert_array_equal(channels.i135, pixels[1::2, 0::2] / 15)
    np.testing.assert_array_equal(channels.i90, pixels[1::2, 1::2] / 15)


def test_demosaic_rejects_odd_dimensions():
    mosaic = MosaicImage(pixels=np.zeros((3, 4), dtype=np.uint16))

    with pytest.raises(InvalidInputError):
        demosaic(mosaic)


def test_demosaic_recovers_malus_responses(small_rig):
    field = synthesize_field(small_rig, SunPosition(azimuth=0.0, altitude=30.0))
    mosaic = synthesize_mosaic(field, noise_sigma=0.0, bit_depth=16)

    channels = demosaic(mosaic)

    centres = (slice(0, None, 2), slice(0, None, 2))
    for angle, channel in zip((0, 45, 90, 135), channels.as_tuple(), strict=True):
        expected = analyzer_response(
            field.s0[centres], field.dop[centres], field.aop[centres], angle
        )
        np.testing.assert_allclose(channel, expected, atol=0.5 / 65535 + 1e-12)


def test_mean_pool_identity(rng):
    maps = rng.random((6, 6))

    np.testing.assert_array_equal(mean_pool(maps, 1), maps)


def test_mean_pool_block_mean():
    assert mean_pool(np.array([[0.0, 1.0], [2.0, 3.0]]), 2)[0, 0] == 1.5


def test_mean_pool_drops_remainder():
    pooled = mean_pool(np.arange(25, dtype=np.float64).reshape(5, 5), 2)

    assert pooled.shape == (2, 2)
    assert pooled[0, 0] == 3.0


@pytest.mark.parametrize("pool_size", [0, -2])
def test_mean_pool_rejects_non_positive(pool_size):
    with pytest.raises(InvalidInputError):
        mean_pool(np.zeros((4, 4)), pool_size)


def test_mean_pool_is_linear(rng):
    x, y = rng.random((8, 8)), rng.random((8, 8))

    np.testing.assert_allclose(
        mean_pool(2.0 * x - 3.0 * y, 4), 2.0 * mean_pool(x, 4) - 3.0 * mean_pool(y, 4)
    )


def test_mean_pool_shrinks_noise_variance(rng):
    noise = rng.normal(0.0, 1.0, (1000, 8, 8))

    pooled = mean_pool(noise, 4)

    assert pooled.var() == pytest.approx(1.0 / 16, rel=0.1)


def test_mean_pool_channels():
    channels = channels_from(*(np.full((4, 4), v) for v in (0.1, 0.2, 0.3, 0.4)))

    pooled = mean_pool(channels, 2)

    assert isinstance(pooled, IntensityChannels)
    assert pooled.shape == (2, 2)
    np.testing.assert_allclose(pooled.i135, 0.4)


@pytest.mark.parametrize(
    ("intensities", "expected"),
    [
        ((1.0, 1.0, 1.0, 1.0), (2.0, 0.0, 0.0)),
        ((1.0, 0.5, 0.0, 0.5), (1.0, 1.0, 0.0)),
        ((0.75, 0.5, 0.25, 0.5), (1.0, 0.5, 0.0)),
    ],
)
def test_stokes(intensities, expected):
    maps = stokes(channels_from(*intensities))

    assert (maps.s0[0, 0], maps.s1[0, 0], maps.s2[0, 0]) == pytest.approx(expected)


@pytest.mark.parametrize(
    ("s", "expected"),
    [
        ((1.0, 0.0, 0.0), 0.0),
        ((1.0, 1.0, 0.0), 1.0),
        ((1.0, 0.3, 0.4), 0.5),
        ((0.0, 0.0, 0.0), 0.0),
    ],
)
def test_dop(s, expected):
    assert dop(stokes_from(*s))[0, 0] == pytest.approx(expected)


def test_dop_clamped_but_raw_kept():
    maps = stokes_from(1.0, 1.2, 0.0)

    assert dop(maps)[0, 0] == 1.0
    assert maps.dop_raw[0, 0] == pytest.approx(1.2)


@pytest.mark.parametrize(
    ("s1", "s2", "expected"),
    [(1.0, 0.0, 0.0), (0.0, 1.0, 45.0), (-1.0, 0.0, 90.0), (-1.0, -0.0, 90.0), (0.0, -1.0, -45.0)],
)
def test_aop(s1, s2, expected):
    angle, degenerate = aop(stokes_from(1.0, s1, s2))

    assert angle[0, 0] == pytest.approx(expected)
    assert not degenerate[0, 0]


def test_aop_degenerate():
    angle, degenerate = aop(stokes_from(1.0, 0.0, 0.0))

    assert angle[0, 0] == 0.0
    assert degenerate[0, 0]


def test_polarimetry_round_trip(rng):
    s0 = rng.uniform(0.1, 2.0, 1000)
    d = rng.uniform(0.0, 1.0, 1000)
    a = rng.uniform(-89.9, 90.0, 1000)

    channels = channels_from(*(analyzer_response(s0, d, a, angle) for angle in (0, 45, 90, 135)))
    pol = polarization(stokes(channels))
    (dop_row,), (aop_row,) = pol.dop, pol.aop

    assert np.max(np.abs(dop_row - d)) < 1e-12
    # aop is only defined where there is polarization to measure
    defined = d > 1e-3
    delta = np.deg2rad(np.mod(aop_row - a + 90.0, 180.0) - 90.0)
    assert np.max(np.abs(delta[defined])) < 1e-12


def test_polarimetry_round_trip_quantized(rng):
    s0 = rng.uniform(0.9, 1.0, 1000)
    d = rng.uniform(0.0, 1.0, 1000)
    a = rng.uniform(-89.9, 90.0, 1000)

    quantized = [
        np.rint(np.clip(analyzer_response(s0, d, a, angle), 0.0, 1.0) * 4095) / 4095
        for angle in (0, 45, 90, 135)
    ]
    pol = polarization(stokes(channels_from(*quantized)))
    (dop_row,), (aop_row,) = pol.dop, pol.aop

    tolerance = 2 / 4096
    assert np.max(np.abs(dop_row - d)) < tolerance
    strong = d >= 0.5
    delta = np.deg2rad(np.mod(aop_row - a + 90.0, 180.0) - 90.0)
    assert np.max(np.abs(delta[strong])) < tolerance


def test_build_feature_tensor_normalization():
    maps = stokes_from([[2.0, 1.0]], [[0.0, 0.0]], [[0.0, 0.0]])
    pol = polarization(maps)
    pol_aop = np.array([[90.0, -89.9]])
    pol = type(pol)(dop=np.array([[0.25, 0.75]]), aop=pol_aop, degenerate=pol.degenerate)

    features = build_feature_tensor(maps, pol)

    assert features.values.shape == (3, 1, 2)
    np.testing.assert_allclose(features.s0, [[1.0, 0.5]])
    np.testing.assert_array_equal(features.dop, [[0.25, 0.75]])
    np.testing.assert_allclose(features.aop, [[1.0, 0.1 / 180]], atol=1e-12)


def test_extract_features_grid(small_rig):
    field = synthesize_field(small_rig, SunPosition(azimuth=0.0, altitude=30.0))
    mosaic = synthesize_mosaic(field, noise_sigma=0.0)

    features = extract_features(mosaic, pool_size=2)

    assert features.grid == (4, 4)
    assert np.all((features.values >= 0.0) & (features.values <= 1.0))
    np.testing.assert_array_equal(np.asarray(features), features.values)


def test_extract_features_default_grid():
    mosaic = MosaicImage(pixels=np.full((64, 64), 2000, dtype=np.uint16))

    assert extract_features(mosaic, pool_size=4).grid == (8, 8)
