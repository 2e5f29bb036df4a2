"""Binary checkpoint format: a JSON header followed by raw float64 tensors.

Layout::

    b"SSCK" | u32 format version | u64 header byte length | header JSON
    then, per tensor in header order: the array as little-endian float64

The header carries the model config echo, free-form extras (training step,
RNG state, anything JSON), and each tensor's name and shape.  Everything is
byte-deterministic given the same inputs.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"SSCK"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


def save_checkpoint(
    path: str | Path,
    tensors: dict[str, np.ndarray],
    config: dict,
    extras: dict | None = None,
) -> None:
    entries = [{"name": name, "shape": list(arr.shape)} for name, arr in tensors.items()]
    header = {
        "version": FORMAT_VERSION,
        "config": config,
        "extras": extras or {},
        "tensors": entries,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for arr in tensors.values():
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict, dict]:
    """Read a checkpoint; returns (tensors, config, extras)."""
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (version,) = struct.unpack("<I", raw[4:8])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (header_len,) = struct.unpack("<Q", raw[8:16])
    if len(raw) < 16 + header_len:
        raise CheckpointError(f"{path}: truncated header")
    header = json.loads(raw[16 : 16 + header_len].decode("utf-8"))
    tensors: dict[str, np.ndarray] = {}
    offset = 16 + header_len
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 8
        if len(raw) < offset + nbytes:
            raise CheckpointError(f"{path}: truncated tensor data for {entry['name']!r}")
        arr = np.frombuffer(raw[offset : offset + nbytes], dtype="<f8").astype(np.float64)
        tensors[entry["name"]] = arr.reshape(shape)
        offset += nbytes
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    return tensors, header["config"], header["extras"]
