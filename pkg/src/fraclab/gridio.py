"""Binary and CSV serialization of grid functions.

The binary container is a 32 byte little-endian header ``(dim, N, L, M)``
packed as ``int64, int64, float64, int64`` followed by ``N**dim`` float64
values in lexicographic node order.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from fraclab.errors import GridError
from fraclab.grid import GridFunction, GridSpec

_HEADER = struct.Struct("<qqdq")


def to_bytes(f: GridFunction) -> bytes:
    s = f.spec
    head = _HEADER.pack(s.dim, s.N, s.L, s.margin)
    return head + np.ascontiguousarray(f.values, dtype="<f8").tobytes()


def from_bytes(data: bytes) -> GridFunction:
    if len(data) < _HEADER.size:
        raise GridError("truncated grid container header")
    dim, n, L, m = _HEADER.unpack_from(data)
    spec = GridSpec(dim, L, n, m)
    body = data[_HEADER.size:]
    if len(body) != 8 * spec.size:
        raise GridError(f"expected {8 * spec.size} payload bytes, found {len(body)}")
    return GridFunction(spec, np.frombuffer(body, dtype="<f8"))


def write_binary(f: GridFunction, path: str | Path) -> None:
    Path(path).write_bytes(to_bytes(f))


def read_binary(path: str | Path) -> GridFunction:
    return from_bytes(Path(path).read_bytes())


def write_csv(f: GridFunction, path: str | Path) -> None:
    """One row per node: coordinates then value, full float precision."""
    coords = [c.ravel() for c in f.spec.coords()]
    names = ["x", "y"][: f.spec.dim]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "value"])
        for row in zip(*coords, f.values.ravel()):
            w.writerow([repr(float(v)) for v in row])
