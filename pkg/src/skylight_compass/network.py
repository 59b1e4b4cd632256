"""Three locally connected sigmoid branches over the (s0, dop, aop) maps, fused by two
fully connected sigmoid layers into the orientation code, trained with mini-batch Adam
on the summed squared error."""

import time
from collections.abc import Iterator
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from scipy.special import expit

from . import get_logger
from .encoding import decode, decode_batch, encode_batch, summarize
from .exceptions import InvalidInputError, ShapeMismatchError, TrainingDivergedError
from .models import (
    BRANCHES,
    EncodingSpec,
    MosaicImage,
    NetworkConfig,
    OrientationDeg,
    TrainConfig,
    TrainReport,
)
from .polarimg import extract_features

logger = get_logger(__name__)

Array = npt.NDArray[np.floating]


@dataclass(eq=False)
class Dense:
    W: Array
    b: Array


@dataclass(eq=False)
class NetworkParams:
    """Weights and biases keyed by layer name, in `NetworkConfig.layer_shapes` order.

    Gradients use the same structure."""

    config: NetworkConfig
    layers: dict[str, Dense]

    def __post_init__(self):
        expected = self.config.layer_shapes()
        if list(self.layers) != list(expected):
            msg = f"layers {list(self.layers)} do not match {list(expected)}"
            raise ShapeMismatchError(msg)
        for name, (fan_in, fan_out) in expected.items():
            layer = self.layers[name]
            if layer.W.shape != (fan_in, fan_out) or layer.b.shape != (fan_out,):
                msg = (
                    f"layer {name} has shapes {layer.W.shape}/{layer.b.shape}, "
                    f"expected {(fan_in, fan_out)}/{(fan_out,)}"
                )
                raise ShapeMismatchError(msg)

    def arrays(self) -> Iterator[tuple[str, Array]]:
        """(key, array) pairs, weight before bias, in checkpoint order."""
        for name, layer in self.layers.items():
            yield f"{name}.W", layer.W
            yield f"{name}.b", layer.b

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            config=self.config,
            layers={n: Dense(l.W.copy(), l.b.copy()) for n, l in self.layers.items()},
        )

    def equals(self, other: "NetworkParams") -> bool:
        return self.config == other.config and all(
            np.array_equal(a, b)
            for (_, a), (_, b) in zip(self.arrays(), other.arrays(), strict=True)
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(array)) for _, array in self.arrays())


@dataclass
class ForwardCache:
    """Input and output activation of every layer for one batch."""

    inputs: dict[str, Array] = field(default_factory=dict)
    outputs: dict[str, Array] = field(default_factory=dict)


def init_params(config: NetworkConfig, seed: int) -> NetworkParams:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    layers = {}
    for name, (fan_in, fan_out) in config.layer_shapes().items():
        if fan_in == 0 or fan_out == 0:
            msg = f"layer {name} has zero size"
            raise InvalidInputError(msg)
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        layers[name] = Dense(
            W=rng.uniform(-limit, limit, (fan_in, fan_out)).astype(config.dtype),
            b=np.zeros(fan_out, dtype=config.dtype),
        )
    return NetworkParams(config=config, layers=layers)


def _as_batch(params: NetworkParams, features) -> Array:
    x = np.asarray(features, dtype=params.config.dtype)
    if x.ndim == 3:
        x = x[None]
    config = params.config
    expected = (len(BRANCHES), config.grid_h, config.grid_w)
    if x.ndim != 4 or x.shape[1:] != expected:
        msg = f"features of shape {x.shape[1:]} do not match network input {expected}"
        raise ShapeMismatchError(msg)
    return x.reshape(x.shape[0], len(BRANCHES), config.grid_cells)


def _dense(params: NetworkParams, cache: ForwardCache, name: str, x: Array, sigmoid=True):
    layer = params.layers[name]
    cache.inputs[name] = x
    z = x @ layer.W + layer.b
    out = expit(z) if sigmoid else z
    cache.outputs[name] = out
    return out


def forward(params: NetworkParams, features) -> tuple[Array, ForwardCache]:
    """Output codes for a (3, h, w) feature tensor or an (n, 3, h, w) batch.

    A single tensor yields a 1-D code, a batch an (n, output_size) array."""
    single = np.ndim(features) == 3
    x = _as_batch(params, features)
    cache = ForwardCache()

    branch_out = []
    for index, branch in enumerate(BRANCHES):
        h = x[:, index, :]
        for depth in (0, 1):
            h = _dense(params, cache, f"{branch}.{depth}", h)
        branch_out.append(h)

    h = np.concatenate(branch_out, axis=1)
    h = _dense(params, cache, "fusion.0", h)
    h = _dense(params, cache, "fusion.1", h)
    y = _dense(
        params, cache, "output", h, sigmoid=params.config.output_activation == "sigmoid"
    )
    return (y[0] if single else y), cache


def batch_loss(outputs: Array, targets: Array) -> float:
    """Squared error summed over neurons, averaged over the batch."""
    outputs, targets = np.atleast_2d(outputs), np.atleast_2d(targets)
    return float(np.sum((outputs - targets) ** 2) / outputs.shape[0])


def backward(params: NetworkParams, cache: ForwardCache, target) -> NetworkParams:
    """Gradients of `batch_loss` with respect to every weight and bias."""
    config = params.config
    y = cache.outputs["output"]
    t = np.atleast_2d(np.asarray(target, dtype=y.dtype))
    if t.shape != y.shape:
        msg = f"target shape {t.shape} does not match output shape {y.shape}"
        raise ShapeMismatchError(msg)

    grads: dict[str, Dense] = {}

    def step(name: str, delta: Array) -> Array:
        grads[name] = Dense(W=cache.inputs[name].T @ delta, b=delta.sum(axis=0))
        return delta @ params.layers[name].W.T

    delta = 2.0 * (y - t) / y.shape[0]
    if config.output_activation == "sigmoid":
        delta = delta * y * (1.0 - y)
    delta = step("output", delta)

    for name in ("fusion.1", "fusion.0"):
        a = cache.outputs[name]
        delta = step(name, delta * a * (1.0 - a))

    width = config.branch_hidden[1]
    for index, branch in enumerate(BRANCHES):
        d = delta[:, index * width : (index + 1) * width]
        for depth in (1, 0):
            name = f"{branch}.{depth}"
            a = cache.outputs[name]
            d = step(name, d * a * (1.0 - a))

    ordered = {name: grads[name] for name in config.layer_shapes()}
    return NetworkParams(config=config, layers=ordered)


class AdamOptimizer:
    """Adaptive moment estimation with bias correction, updating params in place."""

    def __init__(
        self,
        params: NetworkParams,
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ) -> None:
        self.params = params
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = {key: np.zeros_like(array) for key, array in params.arrays()}
        self.v = {key: np.zeros_like(array) for key, array in params.arrays()}

    @classmethod
    def from_config(cls, params: NetworkParams, config: TrainConfig) -> "AdamOptimizer":
        return cls(
            params,
            learning_rate=config.learning_rate,
            beta1=config.beta1,
            beta2=config.beta2,
            epsilon=config.epsilon,
        )

    def step(self, grads: NetworkParams) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for (key, param), (_, grad) in zip(
            self.params.arrays(), grads.arrays(), strict=True
        ):
            m, v = self.m[key], self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad**2
            m_hat = m / correction1
            v_hat = v / correction2
            param -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


def predict_batch(params: NetworkParams, features, spec: EncodingSpec) -> npt.NDArray[np.float64]:
    """Decoded headings in degrees for an (n, 3, h, w) feature batch."""
    params.config.check_spec(spec)
    features = np.asarray(features)
    if features.shape[0] == 0:
        return np.zeros(0)
    outputs, _ = forward(params, features)
    return decode_batch(outputs, spec)


def fit(
    features,
    headings,
    train_config: TrainConfig,
    network_config: NetworkConfig,
    validation: tuple[npt.NDArray, npt.NDArray] | None = None,
) -> tuple[NetworkParams, TrainReport]:
    """Train a fresh network on (n, 3, h, w) features labelled with headings in degrees.

    Initialisation and per-epoch shuffling both derive from `train_config.seed`, so the
    same inputs always produce the same parameters and report.
    """
    spec = train_config.spec
    network_config.check_spec(spec)

    features = np.asarray(features, dtype=network_config.dtype)
    headings = np.asarray(headings, dtype=np.float64)
    if features.shape[0] == 0:
        msg = "cannot train on an empty dataset"
        raise InvalidInputError(msg)
    if features.shape[0] != headings.shape[0]:
        msg = f"{features.shape[0]} feature tensors but {headings.shape[0]} headings"
        raise ShapeMismatchError(msg)

    targets = encode_batch(headings, spec).astype(network_config.dtype)
    params = init_params(network_config, train_config.seed)
    optimizer = AdamOptimizer.from_config(params, train_config)
    shuffle_rng = np.random.default_rng([train_config.seed, 1])
    report = TrainReport()

    count, batch_size = features.shape[0], train_config.batch_size
    log = logger.bind(scheme=spec.scheme.value, j=spec.j, seed=train_config.seed)
    log.info("Training", samples=count, epochs=train_config.epochs, batch_size=batch_size)

    for epoch in range(train_config.epochs):
        started = time.perf_counter()
        order = shuffle_rng.permutation(count)
        total = 0.0

        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, count, batch_size):
                batch = order[start : start + batch_size]
                outputs, cache = forward(params, features[batch])
                total += batch_loss(outputs, targets[batch]) * batch.size
                optimizer.step(backward(params, cache, targets[batch]))

        epoch_loss = total / count
        report.epoch_loss.append(epoch_loss)
        report.epoch_seconds.append(time.perf_counter() - started)

        if not np.isfinite(epoch_loss) or not params.is_finite():
            log.error("Training diverged", epoch=epoch, loss=epoch_loss)
            msg = f"training diverged at epoch {epoch} (loss {epoch_loss})"
            raise TrainingDivergedError(msg, report)

        log.debug("Epoch complete", epoch=epoch, loss=epoch_loss)

    if validation is not None:
        val_features, val_headings = validation
        predicted = predict_batch(params, val_features, spec)
        report.validation = summarize(predicted, val_headings)
        log.info(
            "Validation",
            **{mode: summary.mae for mode, summary in report.validation.items()},
        )

    log.info("Training complete", final_loss=report.epoch_loss[-1] if report.epochs else None)
    return params, report


def predict_orientation(
    params: NetworkParams, mosaic: MosaicImage, spec: EncodingSpec
) -> OrientationDeg:
    config = params.config
    config.check_spec(spec)
    config.check_mosaic(mosaic.pixels.shape)

    output, _ = forward(params, extract_features(mosaic, config.pool_size).values)
    return decode(output, spec)
