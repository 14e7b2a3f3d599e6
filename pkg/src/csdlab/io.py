"""Field snapshots (CSDF binary) and CSV / key-value reports.

CSDF layout: a 32-byte little-endian header

    magic "CSDF" | version u32 | N u32 | L f64 | t f64 | components u32

followed by ``components * N * N`` complex values, row-major, each stored as
a pair of little-endian f64 (real, imaginary).
"""
from __future__ import annotations

import csv
import math
import os
import struct
from pathlib import Path

import numpy as np

from .spectral import Grid

MAGIC = b"CSDF"
VERSION = 1
_HEADER = struct.Struct("<4sIIddI")
HEADER_SIZE = _HEADER.size
_DTYPE = np.dtype("<c16")


class SnapshotError(ValueError):
    pass


def write_snapshot(path, field, grid: Grid, t: float) -> Path:
    """Write a (components, N, N) or (N, N) field; returns the path."""
    data = np.asarray(field, dtype=complex)
    if data.ndim == 2:
        data = data[None]
    if data.ndim != 3 or data.shape[1:] != (grid.N, grid.N):
        raise SnapshotError(f"field shape {data.shape} does not match N = {grid.N}")
    path = Path(path)
    header = _HEADER.pack(MAGIC, VERSION, grid.N, float(grid.L), float(t), data.shape[0])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(data, dtype=_DTYPE).tobytes())
    return path


def read_snapshot(path):
    """Returns (field of shape (components, N, N), grid, t)."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE:
        raise SnapshotError("truncated header")
    magic, version, n, L, t, comps = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported version {version}")
    expected = HEADER_SIZE + comps * n * n * _DTYPE.itemsize
    if len(raw) != expected:
        raise SnapshotError(f"size {len(raw)} does not match header ({expected})")
    data = np.frombuffer(raw, dtype=_DTYPE, offset=HEADER_SIZE).reshape(comps, n, n)
    return data.astype(complex), Grid(n, L), t


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return repr(value) if math.isfinite(value) else str(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def write_csv(path, header, rows) -> Path:
    """Rows are sequences aligned with ``header``; floats written with repr precision."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_kv(path, items: dict) -> Path:
    """``key = value`` lines in insertion order."""
    path = Path(path)
    with open(path, "w") as fh:
        for key, value in items.items():
            fh.write(f"{key} = {_fmt(value)}\n")
    return path


def ensure_dir(path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path
