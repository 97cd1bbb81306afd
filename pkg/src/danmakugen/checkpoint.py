"""Versioned binary checkpoint container.

Layout: magic ``DGCK``, u32 version, u32 header length, UTF-8 JSON header,
then the raw little-endian float64 buffers in header order. The header records
architecture id, seed and iteration, so a run is reconstructible from the file
alone. Writing is byte-deterministic.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"DGCK"
VERSION = 1


def save(path, arch: str, seed: int, iteration: int, named_values) -> None:
    entries = [(name, np.ascontiguousarray(v, dtype=np.float64)) for name, v in named_values]
    header = {
        "arch": arch,
        "seed": int(seed),
        "iteration": int(iteration),
        "params": [{"name": name, "shape": list(v.shape)} for name, v in entries],
    }
    blob = json.dumps(header, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for _, v in entries:
            fh.write(v.astype("<f8").tobytes())


def load(path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    version, header_len = struct.unpack("<II", raw[4:12])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    offset = 12 + header_len
    values: dict[str, np.ndarray] = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        values[entry["name"]] = arr.astype(np.float64)
        offset += count * 8
    if offset != len(raw):
        raise ValueError(f"{path}: trailing bytes after parameter data")
    return header, values
