"""Binary field snapshots.

Layout (all little-endian)::

    b"PENS"            magic
    u32 version        = 1
    u32 n              dimension
    u32 N              samples per axis
    f64 L              box length
    u32 kind           0 = scalar physical, 1 = vector physical
    f64[...]           samples, row-major; vectors component-major (n * N^n values)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spectral import Grid

MAGIC = b"PENS"
VERSION = 1
SCALAR = 0
VECTOR = 1
_HEADER = struct.Struct("<4sIIIdI")


@dataclass
class Snapshot:
    grid: Grid
    kind: int
    samples: np.ndarray


def encode(grid: Grid, samples) -> bytes:
    samples = np.asarray(samples, dtype="<f8")
    if samples.shape == grid.shape:
        kind = SCALAR
    elif samples.shape == (grid.n,) + grid.shape:
        kind = VECTOR
    else:
        raise ValueError(f"samples of shape {samples.shape} do not fit {grid}")
    header = _HEADER.pack(MAGIC, VERSION, grid.n, grid.N, grid.L, kind)
    return header + np.ascontiguousarray(samples).tobytes(order="C")


def decode(data: bytes) -> Snapshot:
    if len(data) < _HEADER.size:
        raise ValueError("truncated snapshot header")
    magic, version, n, N, L, kind = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    if kind not in (SCALAR, VECTOR):
        raise ValueError(f"unknown field kind {kind}")
    grid = Grid(n, N, L)
    shape = grid.shape if kind == SCALAR else (n,) + grid.shape
    count = int(np.prod(shape))
    payload = data[_HEADER.size :]
    if len(payload) != 8 * count:
        raise ValueError(f"expected {8 * count} payload bytes, found {len(payload)}")
    samples = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(float)
    return Snapshot(grid, kind, samples)


def write_snapshot(path, grid: Grid, samples) -> Path:
    path = Path(path)
    path.write_bytes(encode(grid, samples))
    return path


def read_snapshot(path) -> Snapshot:
    return decode(Path(path).read_bytes())
