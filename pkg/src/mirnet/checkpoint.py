"""Binary checkpoint format.

Layout, all integers unsigned 32-bit little-endian:

    magic  b"MIRN"
    u32    format version (currently 1)
    u32    config byte length, then that many bytes of UTF-8 config text
    u32    parameter count
    per parameter:
        u32    name byte length, then UTF-8 name bytes
        u32    rank
        rank x u32 dims
        product(dims) IEEE-754 float64 little-endian values

Parameters are written in insertion order, so a round trip is bitwise
identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (BadMagicError, CheckpointError, TruncatedCheckpointError,
                     VersionMismatchError)
from .numerics import ParameterStore

MAGIC = b"MIRN"
VERSION = 1


@dataclass
class Checkpoint:
    version: int
    config_text: str
    params: dict[str, np.ndarray]


def save_checkpoint(params, config_text: str, path) -> None:
    """Write parameters (a ParameterStore or name->array mapping) and config."""
    if isinstance(params, ParameterStore):
        items = [(p.name, p.value) for p in params]
    else:
        items = [(name, np.asarray(value, dtype=np.float64))
                 for name, value in params.items()]
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    config_bytes = config_text.encode("utf-8")
    chunks.append(struct.pack("<I", len(config_bytes)))
    chunks.append(config_bytes)
    chunks.append(struct.pack("<I", len(items)))
    for name, value in items:
        name_bytes = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(name_bytes)))
        chunks.append(name_bytes)
        arr = np.ascontiguousarray(value, dtype=np.float64)
        chunks.append(struct.pack("<I", arr.ndim))
        for dim in arr.shape:
            chunks.append(struct.pack("<I", dim))
        chunks.append(arr.astype("<f8", copy=False).tobytes())
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedCheckpointError(
                f"truncated checkpoint: needed {n} byte(s) for {what}, "
                f"only {len(self.data) - self.pos} left at offset {self.pos}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def load_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    r = _Reader(data)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version = r.u32("version")
    if version != VERSION:
        raise VersionMismatchError(
            f"checkpoint format version {version} is not supported "
            f"(this build reads version {VERSION})"
        )
    config_len = r.u32("config length")
    config_text = r.take(config_len, "config text").decode("utf-8")
    count = r.u32("parameter count")
    params: dict[str, np.ndarray] = {}
    for i in range(count):
        name_len = r.u32(f"name length of parameter {i}")
        name = r.take(name_len, f"name of parameter {i}").decode("utf-8")
        rank = r.u32(f"rank of {name}")
        dims = tuple(r.u32(f"dim {d} of {name}") for d in range(rank))
        size = 1
        for dim in dims:
            size *= dim
        raw = r.take(8 * size, f"values of {name}")
        params[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).astype(
            np.float64, copy=True)
    if r.pos != len(data):
        raise CheckpointError(
            f"{len(data) - r.pos} trailing byte(s) after the last parameter")
    return Checkpoint(version=version, config_text=config_text, params=params)
