"""
Flat binary checkpoints for ModelParams.

Layout (all little-endian):
- magic b"PXFD", uint32 format version
- uint64 header: D, number of layers L, the L layer output widths, C, d
- float64 payload, layer-major: each layer's weight (row-major) then bias,
  followed by the C x d proxy matrix (row-major)
"""

import struct
from pathlib import Path

import numpy as np

from proxyfed.model.core import DenseLayer, ModelParams, ShapeError

MAGIC = b"PXFD"
FORMAT_VERSION = 1


def encode_params(params: ModelParams) -> bytes:
    """Serialize parameters to the checkpoint layout."""
    widths = [layer.out_dim for layer in params.layers]
    header = [params.input_dim, len(params.layers), *widths, params.num_classes, params.feature_dim]
    head = MAGIC + struct.pack("<I", FORMAT_VERSION) + struct.pack(f"<{len(header)}Q", *header)
    return head + params.flatten().astype("<f8").tobytes()


def decode_params(blob: bytes) -> ModelParams:
    """
    Parse the checkpoint layout.

    Raises:
        ShapeError: If the blob is truncated or not a checkpoint.
    """
    if blob[:4] != MAGIC:
        raise ShapeError("Not a proxyfed checkpoint")
    try:
        return _decode(blob)
    except (struct.error, ValueError) as e:
        raise ShapeError(f"Truncated or corrupt checkpoint: {e}") from e


def _decode(blob: bytes) -> ModelParams:
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != FORMAT_VERSION:
        raise ShapeError(f"Unsupported checkpoint version {version}")
    offset = 8
    input_dim, num_layers = struct.unpack_from("<2Q", blob, offset)
    offset += 16
    widths = list(struct.unpack_from(f"<{num_layers}Q", blob, offset))
    offset += 8 * num_layers
    num_classes, feature_dim = struct.unpack_from("<2Q", blob, offset)
    offset += 16
    if not widths or widths[-1] != feature_dim:
        raise ShapeError("Checkpoint header is inconsistent")

    payload = np.frombuffer(blob, dtype="<f8", offset=offset).astype(np.float64)
    dims = [input_dim, *widths]
    layers = []
    cursor = 0
    for fan_in, fan_out in zip(dims, dims[1:]):
        w_size = fan_in * fan_out
        weight = payload[cursor : cursor + w_size].reshape(fan_out, fan_in)
        cursor += w_size
        bias = payload[cursor : cursor + fan_out]
        cursor += fan_out
        layers.append(DenseLayer(weight=weight, bias=bias))
    proxy_size = num_classes * feature_dim
    if payload.size != cursor + proxy_size:
        raise ShapeError("Checkpoint payload size does not match its header")
    proxies = payload[cursor:].reshape(num_classes, feature_dim)
    return ModelParams(layers=tuple(layers), proxies=proxies)


def save_params(params: ModelParams, path: Path) -> None:
    Path(path).write_bytes(encode_params(params))


def load_params(path: Path) -> ModelParams:
    return decode_params(Path(path).read_bytes())
