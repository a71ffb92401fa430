"""Model checkpoint container.

Binary layout (little-endian):

  bytes 0..3    magic ``TFCK``
  bytes 4..7    format version (uint32)
  bytes 8..15   header length in bytes (uint64)
  header        UTF-8 JSON: kind, parameter table, dtype, metadata
  header hash   sha256 of the header bytes (32 raw bytes)
  payload       float32 arrays concatenated in parameter-table order

The header hash catches header corruption; the payload length must equal
the sum of declared element counts times four. Optimizer moments ride
along as ordinary named tensors (``opt.m.*`` / ``opt.v.*``) and RNG state
lives in metadata, which is what makes bit-exact training resume possible.

Older format versions stay readable through a migration table keyed by
version number.
"""
from __future__ import annotations

import hashlib
import json
import struct
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .raster import atomic_write_bytes

__all__ = [
    "ModelCheckpoint", "CheckpointError", "CURRENT_VERSION",
    "checkpoint_bytes", "write_checkpoint", "read_checkpoint", "checkpoint_file_hash",
]

MAGIC = b"TFCK"
CURRENT_VERSION = 2


class CheckpointError(ValueError):
    """Malformed, corrupted or unsupported checkpoint data."""


@dataclass
class ModelCheckpoint:
    """Named float32 tensors plus free-form training metadata."""

    kind: str
    params: "OrderedDict[str, np.ndarray]"
    trainable: dict[str, bool] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        ordered = OrderedDict()
        for name, value in self.params.items():
            arr = np.ascontiguousarray(value, dtype=np.float32)
            ordered[name] = arr
        self.params = ordered
        for name in self.params:
            self.trainable.setdefault(name, True)


def _header_dict(ckpt: ModelCheckpoint) -> dict:
    return {
        "format_version": CURRENT_VERSION,
        "kind": ckpt.kind,
        "dtype": "float32",
        "params": [
            {
                "name": name,
                "shape": list(arr.shape),
                "trainable": bool(ckpt.trainable.get(name, True)),
            }
            for name, arr in ckpt.params.items()
        ],
        "metadata": ckpt.metadata,
    }


def checkpoint_bytes(ckpt: ModelCheckpoint) -> bytes:
    header = json.dumps(_header_dict(ckpt), sort_keys=True, separators=(",", ":")).encode()
    parts = [
        MAGIC,
        struct.pack("<I", CURRENT_VERSION),
        struct.pack("<Q", len(header)),
        header,
        hashlib.sha256(header).digest(),
    ]
    for arr in ckpt.params.values():
        parts.append(arr.astype("<f4", copy=False).tobytes())
    return b"".join(parts)


def write_checkpoint(ckpt: ModelCheckpoint, path: str) -> None:
    atomic_write_bytes(path, checkpoint_bytes(ckpt))


def _migrate_v1(header: dict) -> dict:
    """v1 parameter entries had no trainable flag; treat all as trainable."""
    for entry in header.get("params", []):
        entry.setdefault("trainable", True)
    header["format_version"] = 2
    return header


_MIGRATIONS = {1: _migrate_v1}


def read_checkpoint_bytes(data: bytes) -> ModelCheckpoint:
    if len(data) < 16 or data[:4] != MAGIC:
        raise CheckpointError("not a model checkpoint (bad magic)")
    (version,) = struct.unpack_from("<I", data, 4)
    (header_len,) = struct.unpack_from("<Q", data, 8)
    header_start = 16
    header_end = header_start + header_len
    if len(data) < header_end + 32:
        raise CheckpointError("truncated checkpoint header")
    header_raw = data[header_start:header_end]
    stored_hash = data[header_end : header_end + 32]
    if hashlib.sha256(header_raw).digest() != stored_hash:
        raise CheckpointError("header hash mismatch: corrupted checkpoint")
    try:
        header = json.loads(header_raw)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from None

    while version != CURRENT_VERSION:
        migrate = _MIGRATIONS.get(version)
        if migrate is None:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        header = migrate(header)
        version = header["format_version"]

    if header.get("dtype") != "float32":
        raise CheckpointError(f"unsupported dtype {header.get('dtype')!r}")
    offset = header_end + 32
    payload = data[offset:]
    total_elements = sum(int(np.prod(e["shape"])) for e in header["params"])
    if len(payload) != total_elements * 4:
        raise CheckpointError(
            f"payload length {len(payload)} does not match declared {total_elements * 4} bytes"
        )
    params: OrderedDict[str, np.ndarray] = OrderedDict()
    trainable: dict[str, bool] = {}
    cursor = 0
    for entry in header["params"]:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=cursor).reshape(shape)
        params[entry["name"]] = arr.copy()
        trainable[entry["name"]] = bool(entry.get("trainable", True))
        cursor += count * 4
    return ModelCheckpoint(
        kind=header.get("kind", ""),
        params=params,
        trainable=trainable,
        metadata=header.get("metadata", {}),
    )


def read_checkpoint(path: str) -> ModelCheckpoint:
    with open(path, "rb") as fh:
        return read_checkpoint_bytes(fh.read())


def checkpoint_file_hash(path: str) -> str:
    """sha256 hex digest of the checkpoint file bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
