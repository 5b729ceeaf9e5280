"""Binary grid files and CSV series.

Grid layout (little-endian):

    offset  size  field
    0       4     magic b"WGRD"
    4       2     u16 version (1)
    6       2     u16 flags, bit 0 set for complex payload
    8       4     u32 rows
    12      4     u32 cols
    16      32    f64 x-min, x-max, second-axis-min, second-axis-max
    48      ...   row-major f64 payload; complex entries stored as (re, im) pairs
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import SolverFailure

MAGIC = b"WGRD"
VERSION = 1
FLAG_COMPLEX = 1
_HEADER = struct.Struct("<4sHHII4d")


@dataclass(frozen=True, eq=False)
class GridFile:
    values: np.ndarray
    extents: tuple[float, float, float, float]
    version: int = VERSION


def encode_grid(values, extents=(0.0, 0.0, 0.0, 0.0)) -> bytes:
    a = np.asarray(values)
    if a.ndim != 2:
        raise ValueError("grid values must be a 2-D array")
    is_complex = np.iscomplexobj(a)
    a = a.astype("<c16" if is_complex else "<f8")
    if not np.all(np.isfinite(a)):
        raise ValueError("grid values must be finite")
    header = _HEADER.pack(MAGIC, VERSION, FLAG_COMPLEX if is_complex else 0, a.shape[0], a.shape[1], *map(float, extents))
    return header + np.ascontiguousarray(a).tobytes()


def decode_grid(data: bytes) -> GridFile:
    if len(data) < _HEADER.size:
        raise ValueError("truncated grid file")
    magic, version, flags, rows, cols, *extents = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError("not a grid file (bad magic)")
    if version != VERSION:
        raise ValueError(f"unsupported grid file version {version}")
    dtype = "<c16" if flags & FLAG_COMPLEX else "<f8"
    expected = rows * cols * np.dtype(dtype).itemsize
    payload = data[_HEADER.size:]
    if len(payload) != expected:
        raise ValueError(f"payload holds {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype=dtype).reshape(rows, cols).copy()
    return GridFile(values, tuple(extents), version)


def write_grid(values, path, extents=(0.0, 0.0, 0.0, 0.0)) -> Path:
    path = Path(path)
    path.write_bytes(encode_grid(values, extents))
    return path


def read_grid(path) -> GridFile:
    return decode_grid(Path(path).read_bytes())


def _format(value) -> str:
    if isinstance(value, (str, bytes)):
        return value if isinstance(value, str) else value.decode()
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _rows(columns: Mapping[str, Sequence]) -> tuple[list[str], list[list]]:
    names = list(columns)
    data = [list(columns[n]) for n in names]
    lengths = {len(c) for c in data}
    if len(lengths) > 1:
        raise ValueError("all columns must have the same length")
    for name, col in zip(names, data):
        for v in col:
            if isinstance(v, (float, np.floating)) and not np.isfinite(v):
                raise SolverFailure(f"non-finite value in column {name!r}")
    return names, [list(r) for r in zip(*data)]


def series_text(columns: Mapping[str, Sequence]) -> str:
    import io as _io

    names, rows = _rows(columns)
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(names)
    for row in rows:
        writer.writerow([_format(v) for v in row])
    return buf.getvalue()


def write_series(columns: Mapping[str, Sequence], path) -> Path:
    """CSV with a header row and 17-significant-digit floats; rejects NaN/inf."""
    path = Path(path)
    text = series_text(columns)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def read_series(path) -> dict[str, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        cols: dict[str, list[str]] = {n: [] for n in names}
        for row in reader:
            for n, v in zip(names, row):
                cols[n].append(v)
    return cols
