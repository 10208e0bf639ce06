"""Commutators of multiplication by a symbol with linear grid operators.

``[b, T] f = b * T f - T(b f)`` and the higher orders by the recurrence
``[b, T]^m = [b, [b, T]^{m-1}]``.  For a convolution operator with kernel
``K`` the m-th order commutator has kernel ``(b(x) - b(y))^m K(|x - y|)``;
:func:`kernel_commutator` evaluates that double sum densely and serves as
an independent route on small grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from fraclab.errors import ExponentError, GridError
from fraclab.fracint import (
    QuadratureSpec,
    fractional_integral,
    gamma_alpha,
    k_alpha_profile,
    l_alpha,
    riesz_kernel,
)
from fraclab.grid import Ball, GridFunction, family_fingerprint
from fraclab.norms import bmo_norm, campanato_norm, lip_norm
from fraclab.semigroup import KernelFamily, apply_semigroup

Operator = Callable[[GridFunction], GridFunction]

DENSE_LIMIT = 4096
DENOMINATOR_FLOOR = 1e-12


# {{{ operators and symbols

@dataclass(frozen=True, eq=False)
class RadialOperator:
    """Convolution operator together with its off-diagonal radial kernel."""

    name: str
    apply: Operator
    kernel: Callable[[np.ndarray], np.ndarray]

    def __call__(self, f: GridFunction) -> GridFunction:
        return self.apply(f)


def riesz_operator(alpha: float, dim: int) -> RadialOperator:
    return RadialOperator(
        f"I_{alpha:g}",
        lambda f: fractional_integral(f, alpha),
        lambda r: riesz_kernel(dim, alpha, r),
    )


def l_alpha_operator(alpha: float, K: KernelFamily, Q: QuadratureSpec | None = None) -> RadialOperator:
    return RadialOperator(
        f"L^-{alpha:g}/2[{K.name}]",
        lambda f: l_alpha(f, alpha, K, Q),
        lambda r: k_alpha_profile(K, alpha, r, Q),
    )


def semigroup_operator(t: float, K: KernelFamily) -> RadialOperator:
    return RadialOperator(
        f"exp(-{t:g}L)[{K.name}]",
        lambda f: apply_semigroup(f, t, K),
        lambda r: K.profile(t, r),
    )


class SymbolFunction:
    """Symbol ``b`` with memoized norm estimates.

    Norm values are cached per exponent tuple and family fingerprint, so a
    cached value always refers to the same estimator call.
    """

    def __init__(self, b: GridFunction, label: str = "b") -> None:
        self.b = b
        self.label = label
        self._cache: dict[tuple, object] = {}

    @property
    def spec(self):
        return self.b.spec

    def lip(self, beta: float) -> float:
        key = ("lip", float(beta))
        if key not in self._cache:
            self._cache[key] = lip_norm(self.b, beta)
        return self._cache[key]

    def campanato(self, p: float, beta: float, balls: Sequence[Ball]):
        key = ("campanato", float(p), float(beta), family_fingerprint(self.spec, balls))
        if key not in self._cache:
            self._cache[key] = campanato_norm(self.b, p, beta, balls)
        return self._cache[key]

    def bmo(self, balls: Sequence[Ball]):
        key = ("bmo", family_fingerprint(self.spec, balls))
        if key not in self._cache:
            self._cache[key] = bmo_norm(self.b, balls)
        return self._cache[key]


def _symbol(b: SymbolFunction | GridFunction) -> GridFunction:
    return b.b if isinstance(b, SymbolFunction) else b

# }}}


# {{{ commutators

def commutator(b: SymbolFunction | GridFunction, f: GridFunction, T: Operator) -> GridFunction:
    """``b * T f - T(b f)``."""
    bb = _symbol(b)
    if bb.spec != f.spec:
        raise GridError("symbol and function live on different grids")
    return bb * T(f) - T(bb * f)


def higher_commutator(
    b: SymbolFunction | GridFunction, f: GridFunction, m: int, T: Operator
) -> GridFunction:
    """``[b, T]^m f`` by the recurrence ``[b, [b, T]^{m-1}]``.

    The inner operator is re-applied to ``b f``, so the cost is ``2^m``
    applications of ``T``.
    """
    if int(m) != m or m < 1:
        raise ExponentError(f"commutator order must be an integer >= 1, got {m}")
    if m == 1:
        return commutator(b, f, T)
    return commutator(b, f, lambda g: higher_commutator(b, g, m - 1, T))


def expanded_commutator(
    b: SymbolFunction | GridFunction, f: GridFunction, m: int, T: Operator
) -> GridFunction:
    """Binomial form ``sum_k C(m,k) (-1)^k b^{m-k} T(b^k f)`` with ``m + 1`` applications."""
    if int(m) != m or m < 1:
        raise ExponentError(f"commutator order must be an integer >= 1, got {m}")
    bv = _symbol(b).values
    acc = np.zeros(f.spec.shape)
    for k in range(m + 1):
        acc += math.comb(m, k) * (-1) ** k * bv ** (m - k) * T(GridFunction(f.spec, bv**k * f.values)).values
    return GridFunction(f.spec, acc)


def kernel_commutator(
    b: SymbolFunction | GridFunction,
    f: GridFunction,
    m: int,
    kernel: Callable[[np.ndarray], np.ndarray] | RadialOperator,
) -> GridFunction:
    """Dense ``h^dim sum_{y != x} (b(x) - b(y))^m K(|x - y|) f(y)``.

    The diagonal is left out because ``(b(x) - b(x))^m = 0`` for ``m >= 1``.
    Only for grids with at most 4096 nodes.
    """
    bb = _symbol(b)
    spec = f.spec
    if bb.spec != spec:
        raise GridError("symbol and function live on different grids")
    if int(m) != m or m < 1:
        raise ExponentError(f"commutator order must be an integer >= 1, got {m}")
    if spec.size > DENSE_LIMIT:
        raise GridError(f"dense kernel route needs N^dim <= {DENSE_LIMIT}, got {spec.size}")
    if isinstance(kernel, RadialOperator):
        kernel = kernel.kernel
    idx = np.stack(np.meshgrid(*[np.arange(spec.N)] * spec.dim, indexing="ij"), axis=-1)
    idx = idx.reshape(-1, spec.dim)
    d2 = ((idx[:, None, :] - idx[None, :, :]) ** 2).sum(-1)
    uniq, inv = np.unique(d2, return_inverse=True)
    kv = np.zeros(uniq.shape)
    kv[1:] = kernel(np.sqrt(uniq[1:].astype(float)) * spec.h)
    Kmat = kv[inv].reshape(d2.shape)
    bv = bb.values.ravel()
    diff = (bv[:, None] - bv[None, :]) ** m
    out = (diff * Kmat) @ f.values.ravel() * spec.cell_volume
    return GridFunction(spec, out)

# }}}


# {{{ Lipschitz domination

@dataclass(frozen=True)
class DominationReport:
    max_ratio: float
    argmax: tuple[int, ...] | None
    lip: float
    constant: float
    points: int
    passed: bool
    ratios: GridFunction | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "max_ratio": self.max_ratio,
            "argmax": list(self.argmax) if self.argmax is not None else None,
            "lip": self.lip,
            "constant": self.constant,
            "points": self.points,
            "pass": self.passed,
        }


def lipschitz_domination_check(
    b: SymbolFunction | GridFunction,
    f: GridFunction,
    alpha: float,
    beta: float,
    m: int,
    T: Operator | None = None,
) -> DominationReport:
    """Pointwise ``|[b, T]^m f| / (||b||_Lip^m * J(|f|))`` on the evaluation region.

    ``J = gamma(alpha + m beta) / gamma(alpha) * I_{alpha + m beta}`` is the
    potential ``1/gamma(alpha) int |f(y)| |x - y|^{alpha + m beta - n} dy``,
    i.e. the Riesz kernel bound with ``|b(x) - b(y)|^m`` replaced by
    ``||b||^m |x - y|^{m beta}``.  With this normalization the ratio of the
    Riesz route never exceeds 1.  ``T`` defaults to ``I_alpha``.
    """
    spec = f.spec
    n = spec.dim
    if not 0 < alpha < n:
        raise ExponentError(f"alpha must lie in (0, {n}), got {alpha}")
    if not 0 < beta <= 1:
        raise ExponentError(f"beta must lie in (0, 1], got {beta}")
    if int(m) != m or m < 1:
        raise ExponentError(f"commutator order must be an integer >= 1, got {m}")
    if not 0 < alpha + m * beta < n:
        raise ExponentError(f"need 0 < alpha + m*beta < dim, got {alpha + m * beta}")
    sym = b if isinstance(b, SymbolFunction) else SymbolFunction(b)
    lip = sym.lip(beta)
    gam = alpha + m * beta
    const = gamma_alpha(n, gam) / gamma_alpha(n, alpha)
    if lip == 0.0:
        return DominationReport(0.0, None, 0.0, const, 0, True)
    T = T or (lambda g: fractional_integral(g, alpha))
    num = np.abs(higher_commutator(sym, f, m, T).values)
    den = lip**m * const * fractional_integral(abs(f), gam).values
    mask = spec.region_mask() & (den > DENOMINATOR_FLOOR)
    ratio = np.zeros(spec.shape)
    ratio[mask] = num[mask] / den[mask]
    k = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    top = float(ratio[k])
    return DominationReport(
        top, tuple(int(i) for i in k), lip, const, int(mask.sum()), bool(np.isfinite(top)),
        GridFunction(spec, ratio),
    )

# }}}
