"""Orientation output encodings, their decoders, the squared-error loss and angular
error metrics. Angles are degrees throughout, trigonometric arguments included."""

import numpy as np
import numpy.typing as npt

from .exceptions import InvalidInputError, ShapeMismatchError
from .models import EncodingSpec, MetricsSummary, Mode, OrientationDeg, Scheme, wrap360

Array = npt.NDArray[np.float64]
CodeVector = Array

# TRIG neurons at or beyond +/-90 degrees from the target are zero
_TRIG_HALF_WINDOW = 90.0


def nearest_neuron(phi, spec: EncodingSpec):
    """Grid index closest to phi; off-grid angles round to the nearest neuron."""
    return np.rint(np.mod(phi, 360.0) / spec.j).astype(np.int64) % spec.neurons


def neuron_offsets(k_star, spec: EncodingSpec):
    """Signed circular distance i of every neuron from k_star, in [-N/2, N/2)."""
    n = spec.neurons
    index = np.arange(n)
    k_star = np.asarray(k_star)[..., None]
    return np.mod(index - k_star + n // 2, n) - n // 2


def _vector_codes(phi: Array, spec: EncodingSpec) -> Array:
    offsets = neuron_offsets(nearest_neuron(phi, spec), spec)

    match spec.scheme:
        case Scheme.ONE_HOT:
            return (offsets == 0).astype(np.float64)
        case Scheme.TRIG:
            angle = offsets * spec.j
            inside = np.abs(angle) < _TRIG_HALF_WINDOW - 1e-9
            return np.where(inside, np.cos(np.deg2rad(angle)), 0.0)
        case Scheme.EXP:
            return spec.m ** np.abs(offsets).astype(np.float64)
        case _:  # pragma: no cover
            raise ValueError(spec.scheme)


def encode_batch(phis, spec: EncodingSpec) -> Array:
    """Codes for an array of headings, shape (n, spec.size)."""
    phi = np.mod(np.asarray(phis, dtype=np.float64).reshape(-1), 360.0)

    match spec.scheme:
        case Scheme.RAW_0_360:
            return phi[:, None].copy()
        case Scheme.NORM_0_1:
            return phi[:, None] / 360.0
        case _:
            return _vector_codes(phi, spec)


def encode(phi: OrientationDeg | float, spec: EncodingSpec) -> CodeVector:
    return encode_batch([wrap360(float(phi))], spec)[0]


def decode_batch(codes, spec: EncodingSpec) -> Array:
    codes = np.atleast_2d(np.asarray(codes, dtype=np.float64))
    if codes.shape[-1] == 0:
        msg = "cannot decode an empty code"
        raise InvalidInputError(msg)
    if codes.shape[-1] != spec.size:
        msg = f"code length {codes.shape[-1]} does not match {spec.scheme.value} size {spec.size}"
        raise ShapeMismatchError(msg)

    match spec.scheme:
        case Scheme.RAW_0_360:
            angles = codes[:, 0]
        case Scheme.NORM_0_1:
            angles = codes[:, 0] * 360.0
        case _:
            # argmax returns the lowest index among ties
            angles = np.argmax(codes, axis=1) * spec.j

    angles = np.mod(angles, 360.0)
    return np.where(angles >= 360.0, 0.0, angles)


def decode(code: CodeVector, spec: EncodingSpec) -> OrientationDeg:
    code = np.asarray(code, dtype=np.float64)
    if code.ndim != 1:
        msg = f"expected a single code vector, got shape {code.shape}"
        raise ShapeMismatchError(msg)
    return OrientationDeg(value=float(decode_batch(code[None], spec)[0]))


def loss(pred: CodeVector, target: CodeVector) -> float:
    pred, target = np.asarray(pred), np.asarray(target)
    if pred.shape != target.shape:
        msg = f"prediction shape {pred.shape} does not match target shape {target.shape}"
        raise ShapeMismatchError(msg)
    return float(np.sum((pred - target) ** 2))


def angular_error(predicted, truth):
    """Shortest distance around the circle, degrees in [0, 180]."""
    delta = np.mod(np.asarray(predicted, dtype=np.float64) - np.asarray(truth), 360.0)
    error = np.minimum(delta, 360.0 - delta)
    return float(error) if error.ndim == 0 else error


def fold_error_180(error):
    """Treat errors of about 180 degrees as small: e if e <= 90 else |e - 180|."""
    error = np.asarray(error, dtype=np.float64)
    if np.any((error < 0) | (error > 180)):
        msg = "angular errors must lie in [0, 180] before folding"
        raise InvalidInputError(msg)
    folded = np.where(error <= 90.0, error, np.abs(error - 180.0))
    return float(folded) if folded.ndim == 0 else folded


def mode_errors(predicted, truth, mode: Mode) -> Array:
    errors = np.atleast_1d(angular_error(predicted, truth))
    return np.atleast_1d(fold_error_180(errors)) if mode == "folded180" else errors


def summarize(predicted, truth) -> dict[Mode, MetricsSummary]:
    """Wrapped and folded error summaries for the same predictions."""
    return {
        mode: MetricsSummary.from_errors(mode_errors(predicted, truth, mode), mode)
        for mode in ("wrapped360", "folded180")
    }
