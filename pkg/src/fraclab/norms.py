"""Ball-family estimators of Lebesgue, Morrey, Campanato and BMO type norms.

Every sup over balls is replaced by a max over a finite family of lattice
balls (usually :func:`fraclab.grid.enumerate_balls`), with the discrete
measure ``m(B) = count * h**dim``.  Estimators return a :class:`NormEstimate`
that records the maximizing ball and a fingerprint of the family, so values
from different families are never compared by accident.

The semigroup-adapted variants replace the ball mean ``f_B`` by the
snapshot ``e^{-r_B^2 L} f``; one snapshot per radius is shared by all balls
of that radius.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from fraclab.errors import ExponentError, GridError, MarginError
from fraclab.grid import (
    Ball,
    GridFunction,
    SummedAreaTable,
    _as_rows,
    _split_centers,
    ball_count,
    ball_offsets,
    centered_power_sums,
    family_fingerprint,
    group_by_radius,
)
from fraclab.semigroup import KernelFamily, apply_semigroup, is_under_resolved

ARGMAX_RTOL = 1e-12


@dataclass(frozen=True)
class NormEstimate:
    """Max over a ball family together with where it is attained."""

    norm: str
    p: float
    exponent: float
    value: float
    argmax_ball: Ball | None
    fingerprint: str
    N: int
    ladder: Mapping | None = None
    flags: tuple[str, ...] = field(default=())

    def __float__(self) -> float:
        return self.value

    def to_dict(self) -> dict:
        b = self.argmax_ball
        return {
            "norm": self.norm,
            "p": self.p,
            "exponent": self.exponent,
            "value": self.value,
            "argmax_center": list(b.center) if b is not None else None,
            "argmax_radius": b.radius if b is not None else None,
            "N": self.N,
            "ladder": dict(self.ladder) if self.ladder is not None else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _check_p(p: float) -> None:
    if not p >= 1:
        raise ExponentError(f"p must be at least 1, got {p}")


def _check_family(balls: Sequence[Ball]) -> None:
    if len(balls) == 0:
        raise GridError("ball family is empty")


def _estimate(
    name: str,
    p: float,
    exponent: float,
    f: GridFunction,
    balls: Sequence[Ball],
    per_ball: np.ndarray,
    flags: tuple[str, ...] = (),
    ladder: Mapping | None = None,
) -> NormEstimate:
    top = float(np.max(per_ball))
    # first ball within rounding of the max, stable under rescaling of f
    k = int(np.argmax(per_ball >= top * (1 - ARGMAX_RTOL))) if top > 0 else 0
    return NormEstimate(
        name, float(p), float(exponent), top, balls[k], family_fingerprint(f.spec, balls),
        f.spec.N, ladder, flags,
    )


def _weight(f: GridFunction, radius: float, exponent: float) -> float:
    m = ball_count(f.spec, radius) * f.spec.cell_volume
    return m ** (-exponent / f.spec.dim)


# {{{ per-ball means

def uncentered_means(f: GridFunction, balls: Sequence[Ball], p: float) -> np.ndarray:
    """``(mean_B |f|^p)^{1/p}`` for every ball of the family."""
    table = SummedAreaTable(f, [p])
    out = np.empty(len(balls))
    for r, idx, centers in group_by_radius(balls):
        out[idx] = (table.ball_sums(r, centers, p) / ball_count(f.spec, r)) ** (1.0 / p)
    return out


def ball_means(f: GridFunction, balls: Sequence[Ball]) -> np.ndarray:
    table = SummedAreaTable(f)
    out = np.empty(len(balls))
    for r, idx, centers in group_by_radius(balls):
        out[idx] = table.ball_sums(r, centers) / ball_count(f.spec, r)
    return out


def centered_means(f: GridFunction, balls: Sequence[Ball], p: float) -> np.ndarray:
    """``(mean_B |f - f_B|^p)^{1/p}`` for every ball of the family."""
    if f.is_constant():
        return np.zeros(len(balls))
    table = SummedAreaTable(f)
    out = np.empty(len(balls))
    for r, idx, centers in group_by_radius(balls):
        n = ball_count(f.spec, r)
        means = table.ball_sums(r, centers) / n
        out[idx] = (centered_power_sums(f, r, centers, means, p) / n) ** (1.0 / p)
    return out


def semigroup_snapshots(
    f: GridFunction, radii, K: KernelFamily
) -> dict[float, GridFunction]:
    """``e^{-r^2 L} f`` for each distinct radius."""
    out = {}
    for r in dict.fromkeys(float(r) for r in radii):
        try:
            out[r] = apply_semigroup(f, r * r, K)
        except MarginError as exc:
            raise MarginError(f"radius {r:.6g} is inadmissible: {exc}") from exc
    return out


def adapted_means(
    f: GridFunction,
    balls: Sequence[Ball],
    p: float,
    K: KernelFamily,
    snapshots: Mapping[float, GridFunction] | None = None,
) -> np.ndarray:
    """``(mean_B |f - e^{-r_B^2 L} f|^p)^{1/p}`` for every ball of the family."""
    groups = group_by_radius(balls)
    if f.is_constant() and K.conservative:
        return np.zeros(len(balls))
    if snapshots is None:
        snapshots = semigroup_snapshots(f, [g[0] for g in groups], K)
    out = np.empty(len(balls))
    for r, idx, centers in groups:
        d = GridFunction(f.spec, np.abs(f.values - snapshots[r].values))
        table = SummedAreaTable(d, [p])
        out[idx] = (table.ball_sums(r, centers, p) / ball_count(f.spec, r)) ** (1.0 / p)
    return out

# }}}


# {{{ estimators

def lp_norm(f: GridFunction, p: float, region: bool = True) -> float:
    """``(h^dim sum |f|^p)^{1/p}`` over the evaluation region (or whole box)."""
    _check_p(p)
    v = np.abs(f.region_values() if region else f.values)
    if np.isinf(p):
        return float(v.max())
    return float((f.spec.cell_volume * np.sum(v**p)) ** (1.0 / p))


def morrey_norm(f: GridFunction, p: float, beta: float, balls: Sequence[Ball], ladder=None) -> NormEstimate:
    """``max_B m(B)^{-beta/n} (mean_B |f|^p)^{1/p}`` for ``-n/p <= beta <= 0``."""
    _check_p(p)
    _check_family(balls)
    n = f.spec.dim
    if not -n / p - 1e-12 <= beta <= 1e-12:
        raise ExponentError(f"Morrey exponent must satisfy -dim/p <= beta <= 0, got {beta}")
    means = uncentered_means(f, balls, p)
    w = np.array([_weight(f, b.radius, beta) for b in balls])
    return _estimate("morrey", p, beta, f, balls, w * means, ladder=ladder)


def campanato_norm(f: GridFunction, p: float, beta: float, balls: Sequence[Ball], ladder=None) -> NormEstimate:
    """``max_B m(B)^{-beta/n} (mean_B |f - f_B|^p)^{1/p}`` for ``-n/p <= beta <= 1``."""
    _check_p(p)
    _check_family(balls)
    n = f.spec.dim
    if not -n / p - 1e-12 <= beta <= 1 + 1e-12:
        raise ExponentError(f"Campanato exponent must satisfy -dim/p <= beta <= 1, got {beta}")
    means = centered_means(f, balls, p)
    w = np.array([_weight(f, b.radius, beta) for b in balls])
    return _estimate("campanato", p, beta, f, balls, w * means, ladder=ladder)


def bmo_norm(f: GridFunction, balls: Sequence[Ball], ladder=None) -> NormEstimate:
    """Max over the family of the centred L^1 mean."""
    est = campanato_norm(f, 1.0, 0.0, balls, ladder)
    return NormEstimate("bmo", 1.0, 0.0, est.value, est.argmax_ball, est.fingerprint, est.N, ladder)


def campanato_L_norm(
    f: GridFunction,
    p: float,
    gamma: float,
    balls: Sequence[Ball],
    K: KernelFamily,
    snapshots: Mapping[float, GridFunction] | None = None,
    ladder=None,
) -> NormEstimate:
    """Campanato norm with ``f_B`` replaced by ``e^{-r_B^2 L} f``."""
    _check_p(p)
    _check_family(balls)
    n = f.spec.dim
    if not -n / p - 1e-12 <= gamma <= 1 + 1e-12:
        raise ExponentError(f"adapted exponent must satisfy -dim/p <= gamma <= 1, got {gamma}")
    means = adapted_means(f, balls, p, K, snapshots)
    w = np.array([_weight(f, b.radius, gamma) for b in balls])
    flags = tuple(
        f"under-resolved t=r^2 at r={r:.6g}"
        for r in sorted({b.radius for b in balls})
        if is_under_resolved(f.spec, r * r)
    )
    return _estimate("campanato_L", p, gamma, f, balls, w * means, flags, ladder)


@dataclass(frozen=True)
class MaximalField:
    """Sharp maximal function on the grid and the nodes no ball covers."""

    field: GridFunction
    covered: np.ndarray

    @property
    def uncovered(self) -> int:
        return int(np.count_nonzero(~self.covered[self.field.spec.region_slice]))


def sharp_maximal_L(
    f: GridFunction,
    K: KernelFamily,
    balls: Sequence[Ball],
    snapshots: Mapping[float, GridFunction] | None = None,
) -> MaximalField:
    """``M#_L f(x) = max_{B ∋ x} mean_B |f - e^{-r_B^2 L} f|`` over the family.

    Nodes that lie in no family ball get the value 0 and are reported in
    ``covered``; a warning is emitted when that happens inside the region.
    """
    _check_family(balls)
    means = adapted_means(f, balls, 1.0, K, snapshots)
    spec = f.spec
    out = np.zeros((1, spec.N) if spec.dim == 1 else spec.shape)
    cov = np.zeros(out.shape, dtype=bool)
    for r, idx, centers in group_by_radius(balls):
        ci, cj = _split_centers(centers)
        v = means[idx]
        for o in ball_offsets(spec, r):
            di, dj = (0, o[0]) if spec.dim == 1 else (o[0], o[1])
            np.maximum.at(out, (ci + di, cj + dj), v)
            cov[ci + di, cj + dj] = True
    result = MaximalField(GridFunction(spec, out.reshape(spec.shape)), cov.reshape(spec.shape))
    if result.uncovered:
        warnings.warn(f"{result.uncovered} region nodes lie in no family ball; set to 0", stacklevel=2)
    return result


def bmo_L_norm(
    f: GridFunction,
    K: KernelFamily,
    balls: Sequence[Ball],
    snapshots: Mapping[float, GridFunction] | None = None,
) -> float:
    """Sup over the evaluation region of :func:`sharp_maximal_L`."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = sharp_maximal_L(f, K, balls, snapshots)
    return float(m.field.region_values().max())


def type_norm(f: GridFunction, p: float, rho: float) -> float:
    """``(int |f|^p (1 + |x|)^{-n-rho} dx)^{1/p}`` truncated to the box."""
    _check_p(p)
    if not rho > 0:
        raise ExponentError(f"rho must be positive, got {rho}")
    n = f.spec.dim
    rad = np.sqrt(sum(c * c for c in f.spec.coords()))
    w = (1.0 + rad) ** (-n - rho)
    return float((f.spec.cell_volume * np.sum(np.abs(f.values) ** p * w)) ** (1.0 / p))


def type_tail_weight(dim: int, L: float, rho: float) -> float:
    """Weight ``int_{|x| > L} (1 + |x|)^{-n-rho} dx`` left out by the box.

    The box contains the ball of radius ``L``, so this bounds the truncation
    error of :func:`type_norm` for ``|f| <= 1``.
    """
    if dim == 1:
        return 2.0 * (1.0 + L) ** (-rho) / rho
    # 2 pi int_L^inf r (1+r)^{-2-rho} dr
    return 2.0 * np.pi * ((1.0 + L) ** (-rho) / rho - (1.0 + L) ** (-1.0 - rho) / (1.0 + rho))


def rh_infty_ratio(b: GridFunction, balls: Sequence[Ball]) -> float:
    """Max over balls of ``sup_B |b - b_B| / mean_B |b - b_B|``.

    Balls where ``b`` is constant are skipped; if every ball is skipped the
    symbol is rejected.
    """
    _check_family(balls)
    spec = b.spec
    v = _as_rows(b.values)
    table = SummedAreaTable(b)
    best = -np.inf
    for r, _, centers in group_by_radius(balls):
        n = ball_count(spec, r)
        means = table.ball_sums(r, centers) / n
        ci, cj = _split_centers(centers)
        sup = np.zeros(len(ci))
        tot = np.zeros(len(ci))
        for o in ball_offsets(spec, r):
            di, dj = (0, o[0]) if spec.dim == 1 else (o[0], o[1])
            d = np.abs(v[ci + di, cj + dj] - means)
            sup = np.maximum(sup, d)
            tot += d
        mean = tot / n
        ok = mean > 1e-14 * np.maximum(np.abs(means), 1.0)
        if np.any(ok):
            best = max(best, float(np.max(sup[ok] / mean[ok])))
    if not np.isfinite(best):
        raise GridError("every ball has zero oscillation; b is constant on the family")
    return best


@dataclass(frozen=True)
class LipEstimate:
    value: float
    pair: tuple[tuple[int, ...], tuple[int, ...]]
    stride: int
    pairs: int

    def __float__(self) -> float:
        return self.value


def lip_estimate(f: GridFunction, beta: float, min_pairs: int = 1_000_000) -> LipEstimate:
    """Max of ``|f(x) - f(y)| / |x - y|^beta`` over pairs of region nodes.

    All pairs are used when the grid has at most 4096 nodes; otherwise the
    region is subsampled with the largest stride that still leaves at least
    ``min_pairs`` pairs.
    """
    if not 0 < beta <= 1:
        raise ExponentError(f"beta must lie in (0, 1], got {beta}")
    spec = f.spec
    lo, hi = spec.region_bounds
    side = hi - lo + 1
    stride = 1
    if spec.size > 4096:
        while True:
            m = (len(range(0, side, stride + 1))) ** spec.dim
            if m * (m - 1) // 2 < min_pairs:
                break
            stride += 1
    ax = np.arange(lo, hi + 1, stride)
    if spec.dim == 1:
        idx = ax[:, None]
    else:
        idx = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    vals = f.values[tuple(idx.T)]
    pos = idx * spec.h
    best, pair = 0.0, (tuple(idx[0]), tuple(idx[0]))
    m = len(idx)
    chunk = max(1, 4_000_000 // m)
    for a in range(0, m, chunk):
        sl = slice(a, min(m, a + chunk))
        d = np.sqrt(((pos[sl, None, :] - pos[None, :, :]) ** 2).sum(-1))
        dv = np.abs(vals[sl, None] - vals[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(d > 0, dv / np.where(d > 0, d, 1.0) ** beta, 0.0)
        k = np.unravel_index(int(np.argmax(q)), q.shape)
        if q[k] > best:
            best = float(q[k])
            pair = (tuple(int(i) for i in idx[a + k[0]]), tuple(int(i) for i in idx[k[1]]))
    return LipEstimate(best, pair, stride, m * (m - 1) // 2)


def lip_norm(f: GridFunction, beta: float) -> float:
    return lip_estimate(f, beta).value

# }}}
