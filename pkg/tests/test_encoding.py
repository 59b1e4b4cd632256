import numpy as np
import pytest
from pydantic import ValidationError

from skylight_compass.encoding import (
    angular_error,
    decode,
    decode_batch,
    encode,
    encode_batch,
    fold_error_180,
    loss,
    summarize,
)
from skylight_compass.exceptions import InvalidInputError, ShapeMismatchError
from skylight_compass.models import EncodingSpec, OrientationDeg, Scheme

ALL_SCHEMES = list(Scheme)


def spec_for(scheme, j=1.0, m=0.98):
    return EncodingSpec(scheme=scheme, j=j, m=m)


def test_trig_neighbour_value():
    code = encode(26.0, spec_for(Scheme.TRIG, j=0.1))

    assert code.shape == (3600,)
    assert code[260] == 1.0
    assert code[259] == pytest.approx(0.99999847691329, abs=1e-12)
    assert code[261] == pytest.approx(0.99999847691329, abs=1e-12)


def test_trig_wraps_to_neuron_zero():
    code = encode(26.0, spec_for(Scheme.TRIG, j=0.1))

    assert code[0] == pytest.approx(np.cos(np.deg2rad(26.0)), abs=1e-12)


def test_trig_zero_outside_window():
    code = encode(0.0, spec_for(Scheme.TRIG, j=1.0))

    assert np.all(code[90:271] == 0.0)
    assert np.all(code[:90] > 0.0)
    assert np.all(code[271:] > 0.0)


def test_exp_neighbour_gap():
    code = encode(26.0, spec_for(Scheme.EXP, j=0.1, m=0.98))

    assert code[260] == 1.0
    assert code[259] == 0.98
    assert code[261] == 0.98
    assert code[260] - code[259] == pytest.approx(0.02, abs=1e-15)


def test_exp_gap_dwarfs_trig_gap():
    exp = encode(26.0, spec_for(Scheme.EXP, j=0.1, m=0.98))
    trig = encode(26.0, spec_for(Scheme.TRIG, j=0.1))

    assert 1.0 - trig[259] == pytest.approx(1.523e-6, rel=1e-3)
    assert exp[260] - exp[259] > 1e4 * (trig[260] - trig[259])


def test_one_hot():
    code = encode(45.0, spec_for(Scheme.ONE_HOT, j=1.0))

    assert code.sum() == 1.0
    assert code[45] == 1.0


@pytest.mark.parametrize(
    ("scheme", "expected"), [(Scheme.RAW_0_360, [180.0]), (Scheme.NORM_0_1, [0.5])]
)
def test_scalar_schemes(scheme, expected):
    np.testing.assert_array_equal(encode(180.0, spec_for(scheme)), expected)


@pytest.mark.parametrize("scheme", ALL_SCHEMES)
def test_encode_wraps(scheme):
    spec = spec_for(scheme)

    np.testing.assert_array_equal(encode(0.0, spec), encode(360.0, spec))
    np.testing.assert_array_equal(encode(17.0, spec), encode(17.0 + 360.0, spec))
    np.testing.assert_array_equal(encode(OrientationDeg(value=-10.0), spec), encode(350.0, spec))


@pytest.mark.parametrize("scheme", [Scheme.TRIG, Scheme.EXP])
def test_codes_symmetric_around_target(scheme):
    spec = spec_for(scheme, j=2.0, m=0.9)
    code = encode(100.0, spec)
    k = 50
    n = spec.neurons

    for i in range(1, n // 2):
        assert code[(k + i) % n] == code[(k - i) % n]


def test_exp_strictly_decreasing_to_midpoint():
    code = encode(0.0, spec_for(Scheme.EXP, j=1.0, m=0.98))

    assert np.all(np.diff(code[:181]) < 0)


def test_trig_strictly_decreasing_inside_window():
    code = encode(0.0, spec_for(Scheme.TRIG, j=1.0))

    assert np.all(np.diff(code[:90]) < 0)


def test_off_grid_rounds_to_nearest_neuron():
    spec = spec_for(Scheme.ONE_HOT, j=1.0)

    assert np.argmax(encode(10.4, spec)) == 10
    assert np.argmax(encode(10.6, spec)) == 11
    assert np.argmax(encode(359.7, spec)) == 0


@pytest.mark.parametrize("scheme", ALL_SCHEMES)
def test_decode_inverts_encode_on_grid(scheme):
    spec = spec_for(scheme, j=5.0)

    for phi in np.arange(0.0, 360.0, 5.0):
        assert decode(encode(phi, spec), spec).value == pytest.approx(phi, abs=1e-9)


def test_decode_exp_index_zero():
    spec = spec_for(Scheme.EXP, j=1.0)

    assert decode(encode(0.0, spec), spec).value == 0.0


def test_decode_ties_take_lowest_index():
    spec = spec_for(Scheme.ONE_HOT, j=90.0)

    assert decode(np.array([0.0, 1.0, 1.0, 0.0]), spec).value == 90.0


@pytest.mark.parametrize(("value", "expected"), [(370.0, 10.0), (-10.0, 350.0)])
def test_decode_raw_wraps(value, expected):
    assert decode(np.array([value]), spec_for(Scheme.RAW_0_360)).value == pytest.approx(expected)


def test_decode_norm_wraps():
    assert decode(np.array([1.25]), spec_for(Scheme.NORM_0_1)).value == pytest.approx(90.0)


def test_decode_robust_to_small_noise(rng):
    spec = spec_for(Scheme.EXP, j=1.0, m=0.98)
    margin = (1.0 - spec.m) / 2

    for phi in rng.integers(0, 360, 50):
        code = encode(float(phi), spec)
        noisy = code + rng.uniform(-margin, margin, code.shape) * 0.999
        assert decode(noisy, spec).value == float(phi)


def test_decode_empty():
    with pytest.raises(InvalidInputError):
        decode(np.array([]), spec_for(Scheme.EXP))


def test_decode_wrong_length():
    with pytest.raises(ShapeMismatchError):
        decode(np.zeros(10), spec_for(Scheme.EXP, j=1.0))


def test_decode_batch():
    spec = spec_for(Scheme.EXP, j=10.0, m=0.7)
    headings = np.arange(0.0, 360.0, 10.0)

    np.testing.assert_allclose(decode_batch(encode_batch(headings, spec), spec), headings)


def test_loss_basic():
    target = np.zeros(5)

    assert loss(target, target) == 0.0
    assert loss(np.array([1.0, 0, 0, 0, 0]), target) == 1.0


def test_loss_length_mismatch():
    with pytest.raises(ShapeMismatchError):
        loss(np.zeros(3), np.zeros(4))


def test_loss_exp_opposite_headings():
    spec = spec_for(Scheme.EXP, j=1.0, m=0.98)
    a, b = encode(0.0, spec), encode(180.0, spec)

    expected = 0.0
    for k in range(360):
        da = min(k, 360 - k)
        db = min(abs(k - 180), 360 - abs(k - 180))
        expected += (0.98**da - 0.98**db) ** 2

    assert loss(a, b) == pytest.approx(expected, rel=1e-12)


def test_loss_invariant_under_circular_shift(rng):
    spec = spec_for(Scheme.EXP, j=1.0, m=0.9)
    a, b = encode(10.0, spec), rng.random(360)

    assert loss(np.roll(a, 37), np.roll(b, 37)) == pytest.approx(loss(a, b))


@pytest.mark.parametrize(
    ("predicted", "truth", "expected"),
    [(0.0, 360.0, 0.0), (359.0, 1.0, 2.0), (12.6307, 191.4, 178.7693), (90.0, 270.0, 180.0)],
)
def test_angular_error(predicted, truth, expected):
    assert angular_error(predicted, truth) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize(
    ("error", "expected"), [(178.7693, 1.2307), (90.0, 90.0), (45.0, 45.0), (180.0, 0.0)]
)
def test_fold_error_180(error, expected):
    assert fold_error_180(error) == pytest.approx(expected, abs=1e-9)


def test_fold_error_rejects_out_of_range():
    with pytest.raises(InvalidInputError):
        fold_error_180(190.0)


def test_summarize_modes():
    summaries = summarize([12.6307], [191.4])

    assert summaries["wrapped360"].mae == pytest.approx(178.7693)
    assert summaries["folded180"].mae == pytest.approx(1.2307)


def test_spec_rejects_non_dividing_j():
    with pytest.raises(ValidationError):
        EncodingSpec(scheme=Scheme.EXP, j=7.0)


@pytest.mark.parametrize("m", [0.0, 1.0, 1.5])
def test_spec_rejects_bad_m(m):
    with pytest.raises(ValidationError):
        EncodingSpec(scheme=Scheme.EXP, m=m)


def test_spec_sizes():
    assert EncodingSpec(scheme=Scheme.EXP, j=0.1).size == 3600
    assert EncodingSpec(scheme=Scheme.RAW_0_360, j=0.1).size == 1
