"""Versioned little-endian checkpoint files.

Layout::

    magic        8 bytes   b"SKYCNN\\0\\0"
    version      <u4
    header_len   <u4
    header       header_len bytes of JSON: network config, encoding spec, layer table
    crc32        <u4       of the payload
    payload      <f8 blocks, per layer W (row-major) then b, in layer order
"""

import struct
import zlib
from pathlib import Path

import numpy as np
import orjson
import pydantic

from . import get_logger
from .exceptions import (
    CheckpointCorruptError,
    CheckpointError,
    CheckpointShapeError,
    CheckpointSpecError,
    CheckpointVersionError,
)
from .models import EncodingSpec, NetworkConfig
from .network import Dense, NetworkParams

logger = get_logger(__name__)

MAGIC = b"SKYCNN\x00\x00"
VERSION = 1

_PREFIX = struct.Struct("<8sII")
_CRC = struct.Struct("<I")
_FLOAT = np.dtype("<f8")


def dumps(params: NetworkParams, spec: EncodingSpec) -> bytes:
    params.config.check_spec(spec)
    header = orjson.dumps(
        {
            "network": params.config.model_dump(mode="json"),
            "encoding": spec.model_dump(mode="json"),
            "layers": [
                [name, fan_in, fan_out]
                for name, (fan_in, fan_out) in params.config.layer_shapes().items()
            ],
        },
        option=orjson.OPT_SORT_KEYS,
    )
    payload = b"".join(
        np.ascontiguousarray(array, dtype=_FLOAT).tobytes() for _, array in params.arrays()
    )
    return (
        _PREFIX.pack(MAGIC, VERSION, len(header))
        + header
        + _CRC.pack(zlib.crc32(payload))
        + payload
    )


def save_checkpoint(path: Path, params: NetworkParams, spec: EncodingSpec) -> None:
    path = Path(path)
    path.write_bytes(dumps(params, spec))
    logger.info("Saved checkpoint", path=str(path), scheme=spec.scheme.value, j=spec.j)


def _parse_header(header: bytes) -> tuple[NetworkConfig, EncodingSpec, list]:
    try:
        data = orjson.loads(header)
        config = NetworkConfig.model_validate(data["network"])
        spec = EncodingSpec.model_validate(data["encoding"])
        layers = [(str(n), int(i), int(o)) for n, i, o in data["layers"]]
    except (orjson.JSONDecodeError, pydantic.ValidationError, KeyError, TypeError, ValueError) as e:
        msg = f"unreadable checkpoint header: {e}"
        raise CheckpointCorruptError(msg) from e

    expected = [(n, i, o) for n, (i, o) in config.layer_shapes().items()]
    if layers != expected:
        msg = "checkpoint layer table disagrees with its network config"
        raise CheckpointCorruptError(msg)

    return config, spec, layers


def loads(
    data: bytes,
    expected_spec: EncodingSpec | None = None,
    expected_config: NetworkConfig | None = None,
) -> tuple[NetworkParams, EncodingSpec]:
    if len(data) < _PREFIX.size:
        msg = f"checkpoint truncated to {len(data)} bytes"
        raise CheckpointCorruptError(msg)

    magic, version, header_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        msg = "not a checkpoint file (bad magic)"
        raise CheckpointCorruptError(msg)
    if version != VERSION:
        msg = f"checkpoint format version {version}, this build reads {VERSION}"
        raise CheckpointVersionError(msg)

    header_end = _PREFIX.size + header_len
    if len(data) < header_end + _CRC.size:
        msg = "checkpoint truncated inside its header"
        raise CheckpointCorruptError(msg)

    config, spec, layers = _parse_header(data[_PREFIX.size : header_end])
    (crc,) = _CRC.unpack_from(data, header_end)
    payload = data[header_end + _CRC.size :]

    values = sum(fan_in * fan_out + fan_out for _, fan_in, fan_out in layers)
    if len(payload) != values * _FLOAT.itemsize:
        msg = f"checkpoint payload holds {len(payload)} bytes, expected {values * _FLOAT.itemsize}"
        raise CheckpointCorruptError(msg)
    if zlib.crc32(payload) != crc:
        msg = "checkpoint payload checksum mismatch"
        raise CheckpointCorruptError(msg)

    if expected_spec is not None and expected_spec != spec:
        if expected_spec.size != spec.size:
            msg = (
                f"checkpoint was trained for {spec.scheme.value} j={spec.j} "
                f"({spec.size} outputs), expected {expected_spec.size}"
            )
            raise CheckpointShapeError(msg)
        msg = f"checkpoint encoding {spec} differs from expected {expected_spec}"
        raise CheckpointSpecError(msg)

    if expected_config is not None and expected_config.layer_shapes() != config.layer_shapes():
        msg = "checkpoint network shapes differ from the expected network config"
        raise CheckpointShapeError(msg)

    flat = np.frombuffer(payload, dtype=_FLOAT)
    offset = 0
    restored = {}
    for name, fan_in, fan_out in layers:
        W = flat[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = flat[offset : offset + fan_out]
        offset += fan_out
        restored[name] = Dense(W=W.astype(config.dtype), b=b.astype(config.dtype))

    return NetworkParams(config=config, layers=restored), spec


def load_checkpoint(
    path: Path,
    expected_spec: EncodingSpec | None = None,
    expected_config: NetworkConfig | None = None,
) -> tuple[NetworkParams, EncodingSpec]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError as e:
        msg = f"no checkpoint at {path}"
        raise CheckpointError(msg) from e

    params, spec = loads(data, expected_spec, expected_config)
    logger.info("Loaded checkpoint", path=str(path), scheme=spec.scheme.value, j=spec.j)
    return params, spec
