"""Trained-model container and its single-file binary format.

Layout (all integers little-endian)::

    offset 0   8 bytes   magic b"FNETCKPT"
    offset 8   uint32    format version (currently 1)
    offset 12  uint64    header length H in bytes
    offset 20  H bytes   UTF-8 JSON header
    offset 20+H          payload: float64 little-endian arrays, back to back

The header lists every payload array as ``[name, shape]`` in payload order,
plus the architecture, training configuration, space, and the CRC-32 and
byte length of the payload.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .errors import DimensionError, FormatError, VersionError
from .head import fit_head
from .network import Architecture, NetworkParams, forward
from .spaces import make_space

MAGIC = b"FNETCKPT"
VERSION = 1
_PREFIX = struct.Struct("<8sIQ")


@dataclass
class Checkpoint:
    arch: Architecture
    params: NetworkParams
    config: TrainConfig
    space: object
    features: np.ndarray  # final-layer representations of the training split
    responses: np.ndarray
    x_shift: np.ndarray
    x_scale: np.ndarray
    version: int = VERSION

    def __post_init__(self):
        self._head = None

    @property
    def head(self):
        if self._head is None:
            self._head = fit_head(self.features, self.responses, self.space, self.config.ridge_policy)
        return self._head

    def standardize(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.arch.input_dim:
            raise DimensionError(f"expected inputs with p={self.arch.input_dim} columns, got shape {X.shape}")
        return (X - self.x_shift) / self.x_scale

    def predict(self, X):
        """Predicted points for raw (unstandardized) inputs of shape ``(m, p)``."""
        Xs = self.standardize(X)
        if len(Xs) == 0:
            return np.empty((0,) + self.space.point_shape)
        F, _ = forward(self.params, self.arch, Xs)
        return self.head.predict_features(F)


def _arrays(ckpt):
    named = []
    for l, (w, b) in enumerate(zip(ckpt.params.weights, ckpt.params.biases)):
        named += [(f"W{l + 1}", w), (f"b{l + 1}", b)]
    named += [("features", ckpt.features), ("responses", ckpt.responses),
              ("x_shift", ckpt.x_shift), ("x_scale", ckpt.x_scale)]
    return named


def save_checkpoint(ckpt: Checkpoint, path):
    named = _arrays(ckpt)
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in named)
    header = {
        "architecture": {
            "input_dim": ckpt.arch.input_dim,
            "hidden_widths": list(ckpt.arch.hidden_widths),
            "dropout": ckpt.arch.dropout,
        },
        "config": ckpt.config.to_dict(),
        "space": {"kind": ckpt.space.kind, "dim": ckpt.space.dim},
        "arrays": [[name, list(np.shape(a))] for name, a in named],
        "payload_bytes": len(payload),
        "payload_crc32": zlib.crc32(payload),
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(hbytes)))
        fh.write(hbytes)
        fh.write(payload)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _PREFIX.size:
        raise FormatError("checkpoint file is truncated")
    magic, version, hlen = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError("not a checkpoint file (bad magic)")
    if version != VERSION:
        raise VersionError(f"unsupported checkpoint version {version} (expected {VERSION})")
    start = _PREFIX.size
    if len(blob) < start + hlen:
        raise FormatError("checkpoint header is truncated")
    try:
        header = json.loads(blob[start:start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"malformed checkpoint header: {exc}") from exc
    payload = blob[start + hlen:]
    if len(payload) != header["payload_bytes"]:
        raise FormatError("checkpoint payload is truncated")
    if zlib.crc32(payload) != header["payload_crc32"]:
        raise FormatError("checkpoint payload checksum mismatch")

    arrays = {}
    pos = 0
    for name, shape in header["arrays"]:
        size = int(np.prod(shape)) * 8
        arrays[name] = np.frombuffer(payload, dtype="<f8", count=size // 8, offset=pos).reshape(shape).astype(float)
        pos += size
    a = header["architecture"]
    arch = Architecture(a["input_dim"], tuple(a["hidden_widths"]), a["dropout"])
    depth = arch.depth
    params = NetworkParams([arrays[f"W{l}"] for l in range(1, depth + 1)],
                           [arrays[f"b{l}"] for l in range(1, depth + 1)])
    params.check(arch)
    return Checkpoint(
        arch=arch,
        params=params,
        config=TrainConfig.from_dict(header["config"]),
        space=make_space(header["space"]["kind"], header["space"]["dim"]),
        features=arrays["features"],
        responses=arrays["responses"],
        x_shift=arrays["x_shift"],
        x_scale=arrays["x_scale"],
        version=version,
    )
