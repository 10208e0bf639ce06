"""Uniform lattices, sampled functions and discrete Euclidean balls.

A :class:`GridSpec` describes the box ``[-L, L)^dim`` sampled at ``N`` nodes
per axis, ``x_i = -L + i*h`` with ``h = 2L/N``.  The outer ``margin`` cells
are a buffer for truncated convolutions; balls and norms only live in the
evaluation region ``[-L + M*h, L - M*h]^dim``.

Balls are lattice balls with a strict inequality, ``|x_node - c| < r``, and
their measure is always the discrete one, ``count * h**dim``.  Ball sums go
through row-wise prefix sums so a ball costs one subtraction per lattice row.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from fraclab.errors import GridError

# relative slack used when comparing radii against lattice distances
RADIUS_RTOL = 1e-12


# {{{ grid spec

@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice on ``[-L, L)^dim``.

    Parameters
    ----------
    dim:
        Spatial dimension, 1 or 2.
    L:
        Half extent of the box.
    N:
        Points per axis, a power of two no smaller than 16.
    margin:
        Buffer width in cells, ``0 <= 2*margin < N``.
    """

    dim: int
    L: float
    N: int
    margin: int = 0

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise GridError(f"L must be a positive finite number, got {self.L}")
        n = self.N
        if int(n) != n or n < 16 or (int(n) & (int(n) - 1)):
            raise GridError(f"N must be a power of two >= 16, got {n}")
        if int(self.margin) != self.margin or self.margin < 0 or 2 * self.margin >= n:
            raise GridError(f"margin must satisfy 0 <= 2*margin < N, got {self.margin}")
        object.__setattr__(self, "N", int(n))
        object.__setattr__(self, "margin", int(self.margin))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def size(self) -> int:
        return self.N**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    def coords(self) -> tuple[np.ndarray, ...]:
        """Node coordinates, one array per axis with ``ij`` indexing."""
        ax = self.axis
        if self.dim == 1:
            return (ax,)
        return tuple(np.meshgrid(ax, ax, indexing="ij"))

    def node(self, index: Sequence[int]) -> tuple[float, ...]:
        return tuple(-self.L + self.h * int(i) for i in index)

    @property
    def half_width(self) -> float:
        """Half width of the evaluation region."""
        return self.L - self.margin * self.h

    @property
    def region_bounds(self) -> tuple[int, int]:
        """Inclusive node index range of the evaluation region along an axis."""
        return self.margin, min(self.N - self.margin, self.N - 1)

    @property
    def region_slice(self) -> tuple[slice, ...]:
        lo, hi = self.region_bounds
        return (slice(lo, hi + 1),) * self.dim

    def region_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[self.region_slice] = True
        return mask

    def scaled(self, N: int) -> GridSpec:
        """Same box and physical margin at another resolution."""
        margin = self.margin * N // self.N
        return GridSpec(self.dim, self.L, N, margin)

# }}}


# {{{ grid functions

def _first_bad_node(spec: GridSpec, values: np.ndarray) -> str:
    idx = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
    return f"non-finite value {values[idx]!r} at node {idx} (x = {spec.node(idx)})"


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real values at the nodes of a :class:`GridSpec`.

    ``values`` is stored read-only with shape ``spec.shape``; a flat input is
    read in lexicographic node order.
    """

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64)
        if v.size != self.spec.size:
            raise GridError(
                f"expected {self.spec.size} values for N={self.spec.N}, dim={self.spec.dim}, got {v.size}"
            )
        v = v.reshape(self.spec.shape)
        if not np.all(np.isfinite(v)):
            raise GridError(_first_bad_node(self.spec, v))
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def _other(self, other: GridFunction | float) -> np.ndarray | float:
        if isinstance(other, GridFunction):
            if other.spec != self.spec:
                raise GridError("grid spec mismatch between operands")
            return other.values
        return float(other)

    def __add__(self, other: GridFunction | float) -> GridFunction:
        return GridFunction(self.spec, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other: GridFunction | float) -> GridFunction:
        return GridFunction(self.spec, self.values - self._other(other))

    def __rsub__(self, other: float) -> GridFunction:
        return GridFunction(self.spec, self._other(other) - self.values)

    def __mul__(self, other: GridFunction | float) -> GridFunction:
        return GridFunction(self.spec, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other: float) -> GridFunction:
        return GridFunction(self.spec, self.values / float(other))

    def __neg__(self) -> GridFunction:
        return GridFunction(self.spec, -self.values)

    def __abs__(self) -> GridFunction:
        return GridFunction(self.spec, np.abs(self.values))

    def __pow__(self, p: float) -> GridFunction:
        return GridFunction(self.spec, self.values**p)

    def region_values(self) -> np.ndarray:
        return self.values[self.spec.region_slice]

    def is_constant(self) -> bool:
        v = self.values
        return bool(np.all(v == v.flat[0]))


def sample(fn: Callable[..., np.ndarray | float], spec: GridSpec) -> GridFunction:
    """Evaluate a vectorized function at every node.

    ``fn`` receives one coordinate array per axis.  Non-finite samples are
    rejected with the offending node in the message.
    """
    vals = np.asarray(fn(*spec.coords()), dtype=np.float64)
    vals = np.broadcast_to(vals, spec.shape)
    return GridFunction(spec, vals)


def zeros(spec: GridSpec) -> GridFunction:
    return GridFunction(spec, np.zeros(spec.shape))

# }}}


# {{{ balls

@dataclass(frozen=True)
class Ball:
    """Open lattice ball ``{node : |node - center| < radius}``.

    ``center`` is a node index tuple, ``radius`` a physical length.
    """

    center: tuple[int, ...]
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(int(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))

    def dilate(self, factor: float) -> Ball:
        return Ball(self.center, self.radius * factor)


def ball_fits(spec: GridSpec, ball: Ball) -> bool:
    """Whether ``ball`` has valid size and lies in the evaluation region."""
    if len(ball.center) != spec.dim or ball.radius < spec.h * (1 - RADIUS_RTOL):
        return False
    rho = ball.radius / spec.h
    lo, hi = spec.margin, spec.N - spec.margin
    slack = RADIUS_RTOL * max(rho, 1.0)
    return all(c - rho >= lo - slack and c + rho <= hi + slack for c in ball.center)


def check_ball(spec: GridSpec, ball: Ball) -> None:
    if len(ball.center) != spec.dim:
        raise GridError(f"ball center {ball.center} does not match dim={spec.dim}")
    if ball.radius < spec.h * (1 - RADIUS_RTOL):
        raise GridError(f"ball radius {ball.radius} is below the spacing h={spec.h}")
    if not ball_fits(spec, ball):
        raise GridError(
            f"ball at {ball.center} with radius {ball.radius} escapes the evaluation region"
        )


@lru_cache(maxsize=512)
def _offsets(dim: int, rho: float) -> np.ndarray:
    k = int(np.ceil(rho))
    rng = np.arange(-k, k + 1)
    if dim == 1:
        o = rng[:, None]
    else:
        o = np.stack(np.meshgrid(rng, rng, indexing="ij"), axis=-1).reshape(-1, 2)
    keep = (o**2).sum(axis=1) < rho * rho * (1 - RADIUS_RTOL)
    out = np.ascontiguousarray(o[keep])
    out.setflags(write=False)
    return out


def ball_offsets(spec: GridSpec, radius: float) -> np.ndarray:
    """Integer offsets of the lattice points of a ball, lexicographic order."""
    return _offsets(spec.dim, round(radius / spec.h, 12))


@lru_cache(maxsize=512)
def _rows(dim: int, rho: float) -> tuple[tuple[int, int], ...]:
    o = _offsets(dim, rho)
    if dim == 1:
        return ((0, int(o[:, 0].max())),)
    rows: dict[int, int] = {}
    for di, dj in o:
        rows[int(di)] = max(rows.get(int(di), 0), int(dj))
    return tuple(sorted(rows.items()))


def ball_count(spec: GridSpec, radius: float) -> int:
    return int(ball_offsets(spec, radius).shape[0])


def ball_measure(spec: GridSpec, radius: float) -> float:
    """Discrete measure ``count * h**dim`` of a ball of the given radius."""
    return ball_count(spec, radius) * spec.cell_volume


def ball_points(spec: GridSpec, ball: Ball) -> np.ndarray:
    """Node indices inside ``ball`` as an array of shape ``(count, dim)``."""
    check_ball(spec, ball)
    return np.asarray(ball.center)[None, :] + ball_offsets(spec, ball.radius)


@dataclass(frozen=True)
class BallLadder:
    """Geometric sequence of radii with centers on a strided sublattice.

    Radii are ``r_min * ratio**j`` for ``j < count``; centers are the nodes
    ``N//2 + k*stride`` along each axis.
    """

    r_min: float
    ratio: float = 2.0
    count: int = 3
    stride: int = 1

    def __post_init__(self) -> None:
        if not (np.isfinite(self.r_min) and self.r_min > 0):
            raise GridError(f"r_min must be positive, got {self.r_min}")
        if not (np.isfinite(self.ratio) and self.ratio > 1):
            raise GridError(f"ratio must exceed 1, got {self.ratio}")
        if int(self.count) != self.count or self.count < 1:
            raise GridError(f"count must be a positive integer, got {self.count}")
        if int(self.stride) != self.stride or self.stride < 1:
            raise GridError(f"stride must be a positive integer, got {self.stride}")

    @property
    def radii(self) -> list[float]:
        return [self.r_min * self.ratio**j for j in range(int(self.count))]

    def validate(self, spec: GridSpec) -> None:
        if self.r_min < spec.h * (1 - RADIUS_RTOL):
            raise GridError(f"r_min={self.r_min} is below the spacing h={spec.h}")
        r_max = self.radii[-1]
        if r_max > spec.half_width * (1 + RADIUS_RTOL):
            raise GridError(
                f"largest radius {r_max} exceeds the evaluation half width {spec.half_width}"
            )

    def center_axis(self, spec: GridSpec) -> np.ndarray:
        mid = spec.N // 2
        s = int(self.stride)
        lo = mid - (mid // s) * s
        return np.arange(lo, spec.N, s)


def enumerate_balls(spec: GridSpec, ladder: BallLadder) -> list[Ball]:
    """All ladder balls that fit the evaluation region.

    Order is radius-major, then lexicographic in the center index.
    """
    ladder.validate(spec)
    axis = ladder.center_axis(spec)
    if spec.dim == 1:
        centers = [(int(i),) for i in axis]
    else:
        centers = [(int(i), int(j)) for i in axis for j in axis]
    balls = []
    for r in ladder.radii:
        for c in centers:
            b = Ball(c, r)
            if ball_fits(spec, b):
                balls.append(b)
    if not balls:
        raise GridError("ladder produces no ball inside the evaluation region")
    return balls


def group_by_radius(balls: Sequence[Ball]) -> list[tuple[float, np.ndarray, np.ndarray]]:
    """Split a ball list into ``(radius, positions, centers)`` groups.

    ``positions`` indexes into ``balls``; ``centers`` has shape ``(k, dim)``.
    Groups appear in order of first occurrence.
    """
    groups: dict[float, list[int]] = {}
    for i, b in enumerate(balls):
        groups.setdefault(b.radius, []).append(i)
    out = []
    for r, idx in groups.items():
        centers = np.array([balls[i].center for i in idx], dtype=np.int64)
        out.append((r, np.array(idx, dtype=np.int64), centers))
    return out


def family_fingerprint(spec: GridSpec, balls: Iterable[Ball]) -> str:
    """Short stable hash of a grid together with a ball family."""
    hsh = hashlib.sha256()
    hsh.update(repr((spec.dim, spec.L, spec.N, spec.margin)).encode())
    for b in balls:
        hsh.update(repr((b.center, b.radius)).encode())
    return hsh.hexdigest()[:16]

# }}}


# {{{ ball sums

def _as_rows(values: np.ndarray) -> np.ndarray:
    return values.reshape(1, -1) if values.ndim == 1 else values


def _split_centers(centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    centers = np.asarray(centers, dtype=np.int64).reshape(len(centers), -1)
    if centers.shape[1] == 1:
        return np.zeros(len(centers), dtype=np.int64), centers[:, 0]
    return centers[:, 0], centers[:, 1]


class SummedAreaTable:
    """Row-wise prefix sums of a grid function and of ``|f|**p``.

    A ball is a union of row segments, so a ball sum is one prefix difference
    per lattice row.  Rectangle sums use the same row segments.

    Parameters
    ----------
    f:
        Function whose sums are requested.
    exponents:
        Exponents ``p`` for which prefix sums of ``|f|**p`` are prepared.
    """

    def __init__(self, f: GridFunction, exponents: Iterable[float] = ()) -> None:
        self.spec = f.spec
        self._prefix: dict[float | None, np.ndarray] = {None: self._build(f.values)}
        for p in exponents:
            self.add_exponent(f, p)
        self._f = f

    @staticmethod
    def _build(values: np.ndarray) -> np.ndarray:
        v = _as_rows(values)
        out = np.zeros((v.shape[0], v.shape[1] + 1))
        np.cumsum(v, axis=1, out=out[:, 1:])
        return out

    def add_exponent(self, f: GridFunction, p: float) -> None:
        p = float(p)
        if p not in self._prefix:
            self._prefix[p] = self._build(np.abs(f.values) ** p)

    def _table(self, p: float | None) -> np.ndarray:
        key = None if p is None else float(p)
        if key not in self._prefix:
            self.add_exponent(self._f, key)
        return self._prefix[key]

    def rectangle_sum(self, lo: Sequence[int], hi: Sequence[int], p: float | None = None) -> float:
        """Sum over the inclusive index box ``lo <= i <= hi``."""
        P = self._table(p)
        if self.spec.dim == 1:
            return float(P[0, hi[0] + 1] - P[0, lo[0]])
        rows = np.arange(lo[0], hi[0] + 1)
        return float(np.sum(P[rows, hi[1] + 1] - P[rows, lo[1]]))

    def ball_sums(self, radius: float, centers: np.ndarray, p: float | None = None) -> np.ndarray:
        """Sums of ``f`` (or ``|f|**p``) over equal-radius balls at ``centers``."""
        P = self._table(p)
        ci, cj = _split_centers(centers)
        acc = np.zeros(len(ci))
        for di, k in _rows(self.spec.dim, round(radius / self.spec.h, 12)):
            rows = ci + di
            acc += P[rows, cj + k + 1] - P[rows, cj - k]
        return acc

    def ball_sum(self, ball: Ball, p: float | None = None) -> float:
        check_ball(self.spec, ball)
        return float(self.ball_sums(ball.radius, np.array([ball.center]), p)[0])


def centered_power_sums(
    f: GridFunction, radius: float, centers: np.ndarray, means: np.ndarray, p: float
) -> np.ndarray:
    """``sum_{x in B} |f(x) - mean_B|**p`` for equal-radius balls.

    The center value differs per ball, so this accumulates over the stencil
    offsets instead of using prefix sums.
    """
    v = _as_rows(f.values)
    ci, cj = _split_centers(centers)
    acc = np.zeros(len(ci))
    for o in ball_offsets(f.spec, radius):
        di, dj = (0, o[0]) if f.spec.dim == 1 else (o[0], o[1])
        acc += np.abs(v[ci + di, cj + dj] - means) ** p
    return acc


def ball_average(f: GridFunction, ball: Ball, table: SummedAreaTable | None = None) -> float:
    """Discrete average of ``f`` over ``ball``."""
    table = table or SummedAreaTable(f)
    return table.ball_sum(ball) / ball_count(f.spec, ball.radius)


def ball_lp_mean(
    f: GridFunction,
    ball: Ball,
    p: float,
    centered: bool = False,
    table: SummedAreaTable | None = None,
) -> float:
    """``(mean_B |f - c|**p)**(1/p)`` with ``c = 0`` or ``c = mean_B f``."""
    if not p >= 1:
        raise GridError(f"p must be at least 1, got {p}")
    table = table or SummedAreaTable(f)
    n = ball_count(f.spec, ball.radius)
    if centered:
        mean = table.ball_sum(ball) / n
        s = centered_power_sums(f, ball.radius, np.array([ball.center]), np.array([mean]), p)[0]
    else:
        s = table.ball_sum(ball, p)
    return float((s / n) ** (1.0 / p))

# }}}
