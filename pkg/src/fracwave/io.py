"""
File formats: FWF1 field snapshots, CSV tables and verdict JSON.

FWF1 layout (all little-endian)::

    b"FWF1"  u32 version=1  u32 d  u64 N (x d)  f64 L (x d)  f64 time  f64 values (N^d, row-major)

The grid is cubic, so every axis repeats the same ``N`` and ``L``; the reader
rejects files where they differ.
"""
from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .grid import Field, Grid

__all__ = [
    "write_fwf",
    "read_fwf",
    "format_float",
    "write_csv",
    "read_csv",
    "write_verdict",
    "read_verdict",
    "ENERGY_HEADER",
    "SWEEP_HEADER",
    "COHERENCE_HEADER",
]

MAGIC = b"FWF1"
VERSION = 1

ENERGY_HEADER = ("t", "E", "dissipated", "norm1", "norm2", "l2_u", "l2_ut")
SWEEP_HEADER = (
    "eps",
    "coef_linf",
    "coef_lds",
    "coef_ld2s",
    "data_hs",
    "data_l2",
    "sup_norm1",
    "sup_norm2",
    "terminal_err",
)
COHERENCE_HEADER = ("eps", "l2_err")


def write_fwf(path, field: Field, time: float = 0.0) -> None:
    g = field.grid
    head = struct.pack("<4sII", MAGIC, VERSION, g.d)
    head += struct.pack(f"<{g.d}Q", *([g.N] * g.d))
    head += struct.pack(f"<{g.d}d", *([g.L] * g.d))
    head += struct.pack("<d", float(time))
    body = np.ascontiguousarray(field.values, dtype="<f8").tobytes(order="C")
    Path(path).write_bytes(head + body)


def read_fwf(path) -> tuple[Field, float]:
    """Return ``(field, time)``; raises :class:`FormatError` on malformed files."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise FormatError(f"{path}: not an FWF1 file")
    version, d = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if not 1 <= d <= 3:
        raise FormatError(f"{path}: bad dimension {d}")
    off = 12
    need = off + 16 * d + 8
    if len(raw) < need:
        raise FormatError(f"{path}: truncated header")
    Ns = struct.unpack_from(f"<{d}Q", raw, off)
    off += 8 * d
    Ls = struct.unpack_from(f"<{d}d", raw, off)
    off += 8 * d
    (time,) = struct.unpack_from("<d", raw, off)
    off += 8
    if len(set(Ns)) != 1 or len(set(Ls)) != 1:
        raise FormatError(f"{path}: non-cubic grids are not supported")
    grid = Grid(d, int(Ns[0]), float(Ls[0]))
    count = grid.size
    if len(raw) != off + 8 * count:
        raise FormatError(f"{path}: expected {count} values, payload has {(len(raw) - off) / 8:g}")
    values = np.frombuffer(raw, dtype="<f8", count=count, offset=off).astype(float).reshape(grid.shape)
    return Field(grid, values), float(time)


def format_float(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise FormatError("row length does not match header")
            w.writerow([format_float(v) for v in row])


def read_csv(path) -> tuple[tuple[str, ...], np.ndarray]:
    """Bundled reader: ``(header, values)`` with ``values`` of shape ``(rows, cols)``."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        try:
            header = tuple(next(r))
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        rows = []
        for line in r:
            if len(line) != len(header):
                raise FormatError(f"{path}: ragged row {line}")
            rows.append([float(v) for v in line])
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_verdict(path, verdict: dict) -> None:
    """Write a verdict document; non-finite floats become ``null``."""
    missing = {"study", "pass", "metrics", "thresholds", "paper_ref"} - set(verdict)
    if missing:
        raise FormatError(f"verdict lacks {sorted(missing)}")
    Path(path).write_text(json.dumps(_jsonable(verdict), indent=2, sort_keys=True) + "\n")


def read_verdict(path) -> dict:
    return json.loads(Path(path).read_text())
