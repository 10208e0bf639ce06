"""Riesz potentials and fractional powers of semigroup generators.

The generalized fractional integral is the subordination integral

    L^{-alpha/2} f = 1/Gamma(alpha/2) * int_0^inf e^{-tL} f * t^{alpha/2 - 1} dt,

whose kernel ``K_alpha(r)`` is the same time integral of the profile.  For the
heat kernel of ``-Laplacian`` it is exactly the Riesz kernel
``r^{alpha - n} / gamma(alpha)``.

Time integrals use ``t = r^2 e^u`` and the trapezoid rule in ``u``.  Working
relative to ``r^2`` makes one window serve every distance: the integrand is
doubly exponentially small for ``u -> -inf`` and decays like
``exp(-u (n - alpha)/2)`` for ``u -> +inf``.  Operators are applied by
assembling ``K_alpha`` into a convolution stencil; the origin cell gets the
cell average of the ``r^{alpha - n}`` singularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from fraclab.conv import convolve, radial_stencil
from fraclab.errors import ExponentError, QuadratureError
from fraclab.grid import GridFunction, GridSpec
from fraclab.semigroup import KernelFamily, apply_semigroup, check_margin

DECAY_CHECK = 1e-12   # boundary/peak ratio accepted at run time
DECAY_TARGET = 1e-14  # boundary/peak ratio aimed at by default windows
DEFAULT_DU = 0.2


def _check_alpha(dim: int, alpha: float) -> None:
    if not 0 < alpha < dim:
        raise ExponentError(f"alpha must lie in (0, {dim}), got {alpha}")


# {{{ quadrature spec

@dataclass(frozen=True)
class QuadratureSpec:
    """Trapezoid rule on ``u in [s_min, s_max]`` with ``t = r^2 e^u``.

    ``steps`` counts intervals, so there are ``steps + 1`` nodes.
    """

    s_min: float
    s_max: float
    steps: int = 512

    def __post_init__(self) -> None:
        if not self.s_min < self.s_max:
            raise QuadratureError(f"need s_min < s_max, got [{self.s_min}, {self.s_max}]")
        if int(self.steps) != self.steps or self.steps < 64:
            raise QuadratureError(f"steps must be an integer >= 64, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def du(self) -> float:
        return (self.s_max - self.s_min) / self.steps

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        u = np.linspace(self.s_min, self.s_max, self.steps + 1)
        w = np.full(u.shape, self.du)
        w[0] = w[-1] = 0.5 * self.du
        return u, w

    def refined(self, factor: int = 2) -> QuadratureSpec:
        return QuadratureSpec(self.s_min, self.s_max, self.steps * factor)

    @classmethod
    def default(cls, dim: int, alpha: float, A: float = 0.25, du: float = DEFAULT_DU) -> QuadratureSpec:
        """Window where the Gaussian-bound shape ``exp(-c u - A e^{-u})`` of the
        integrand, ``c = (dim - alpha)/2``, falls below ``1e-14`` of its peak."""
        _check_alpha(dim, alpha)
        c = 0.5 * (dim - alpha)
        u_peak = math.log(A / c)

        def drop(u: float) -> float:
            return (c * u + A * math.exp(-u)) - (c * u_peak + c)

        target = math.log(1.0 / DECAY_TARGET)
        lo = u_peak - 1.0
        while drop(lo) < target:
            lo -= 1.0
        hi = u_peak + 1.0
        while drop(hi) < target:
            hi += 1.0
        steps = max(64, int(math.ceil((hi - lo) / du)))
        return cls(lo, hi, steps)


def _trapezoid(integrand: np.ndarray, w: np.ndarray, what: str) -> np.ndarray:
    """Weighted row sums of ``integrand`` after the boundary decay check."""
    mag = np.abs(integrand)
    peak = mag.max(axis=-1)
    edge = np.maximum(mag[..., 0], mag[..., -1])
    bad = edge > DECAY_CHECK * peak
    if np.any(bad):
        k = int(np.argmax(bad))
        raise QuadratureError(
            f"quadrature window too narrow for {what}: boundary/peak ratio "
            f"{float(edge.flat[k] / peak.flat[k]):.3e} exceeds {DECAY_CHECK:g}"
        )
    return integrand @ w

# }}}


# {{{ riesz potential

def gamma_alpha(dim: int, alpha: float) -> float:
    """Normalization ``2^alpha pi^{n/2} Gamma(alpha/2) / Gamma((n - alpha)/2)``."""
    _check_alpha(dim, alpha)
    return (
        2.0**alpha * math.pi ** (dim / 2) * math.gamma(alpha / 2) / math.gamma((dim - alpha) / 2)
    )


def riesz_kernel(dim: int, alpha: float, r):
    """``r^{alpha - dim} / gamma(alpha)`` for ``r > 0``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ExponentError("riesz_kernel needs r > 0; use regularized_riesz at the origin")
    return r ** (alpha - dim) / gamma_alpha(dim, alpha)


@lru_cache(maxsize=None)
def _sec_power_integral(alpha: float) -> float:
    # int_0^{pi/4} sec(theta)^alpha dtheta, smooth integrand
    x, w = np.polynomial.legendre.leggauss(64)
    theta = 0.125 * math.pi * (x + 1.0)
    return float(0.125 * math.pi * np.sum(w * np.cos(theta) ** (-alpha)))


def regularized_riesz(dim: int, alpha: float, h: float) -> float:
    """Average of the Riesz kernel over the cell ``[-h/2, h/2]^dim``."""
    _check_alpha(dim, alpha)
    g = gamma_alpha(dim, alpha)
    if dim == 1:
        return (0.5 * h) ** (alpha - 1.0) / alpha / g
    # eight octant triangles, radius up to (h/2)/cos(theta)
    return 8.0 / h**2 * (0.5 * h) ** alpha / alpha * _sec_power_integral(alpha) / g


@lru_cache(maxsize=32)
def _riesz_stencil(spec: GridSpec, alpha: float) -> np.ndarray:
    reach = spec.N - 1
    st = radial_stencil(
        spec, reach, lambda r: np.where(r > 0, np.where(r > 0, r, 1.0) ** (alpha - spec.dim), 0.0)
    )
    st /= gamma_alpha(spec.dim, alpha)
    st[(reach,) * spec.dim] = regularized_riesz(spec.dim, alpha, spec.h)
    st.setflags(write=False)
    return st


def fractional_integral(f: GridFunction, alpha: float) -> GridFunction:
    """Riesz potential ``I_alpha f`` by full-grid linear convolution."""
    _check_alpha(f.spec.dim, alpha)
    return convolve(f, _riesz_stencil(f.spec, float(alpha)), f.spec.cell_volume)

# }}}


# {{{ subordinated kernels

def _prepare(K: KernelFamily, alpha: float, Q: QuadratureSpec | None) -> QuadratureSpec:
    _check_alpha(K.dim, alpha)
    return Q if Q is not None else QuadratureSpec.default(K.dim, alpha, K.gaussian_A)


def _chunks(n_r: int, n_u: int):
    size = max(1, 2_000_000 // max(n_u, 1))
    for a in range(0, n_r, size):
        yield slice(a, min(n_r, a + size))


def _weighted_profile(K: KernelFamily, log_t: np.ndarray, r: np.ndarray, alpha: float) -> np.ndarray:
    """``p(t, r) * t^{alpha/2}`` given ``ln t``; in log space when possible."""
    if K.log_profile is not None:
        return np.exp(K.log_profile(log_t, r) + 0.5 * alpha * log_t)
    t = np.exp(log_t)
    with np.errstate(over="ignore", invalid="ignore"):
        return K.profile(t, r) * t ** (0.5 * alpha)


def k_alpha_profile(K: KernelFamily, alpha: float, r, Q: QuadratureSpec | None = None):
    """Kernel ``1/Gamma(alpha/2) int p(t, r) t^{alpha/2 - 1} dt`` of ``L^{-alpha/2}``."""
    Q = _prepare(K, alpha, Q)
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr <= 0):
        raise ExponentError("k_alpha_profile needs r > 0")
    u, w = Q.nodes()
    out = np.empty(r_arr.shape)
    flat, res = r_arr.ravel(), out.reshape(-1)
    for sl in _chunks(flat.size, u.size):
        rr = flat[sl, None]
        log_t = 2.0 * np.log(rr) + u[None, :]
        res[sl] = _trapezoid(_weighted_profile(K, log_t, rr, alpha), w, "k_alpha_profile")
    out /= math.gamma(alpha / 2)
    return out if np.ndim(r) else float(out[0])


def k_alpha_bound_constant(K: KernelFamily, alpha: float) -> float:
    """``C A^{(alpha-n)/2} Gamma((n-alpha)/2) / Gamma(alpha/2)``.

    Integrating the Gaussian bound in time gives
    ``|K_alpha(r)| <= k_alpha_bound_constant * r^{alpha - n}``.
    """
    _check_alpha(K.dim, alpha)
    n = K.dim
    return (
        K.gaussian_C
        * K.gaussian_A ** ((alpha - n) / 2)
        * math.gamma((n - alpha) / 2)
        / math.gamma(alpha / 2)
    )


def difference_kernel(K: KernelFamily, alpha: float, t: float, r, Q: QuadratureSpec | None = None):
    """Kernel of ``(I - e^{-tL}) L^{-alpha/2}`` at distance ``r``.

    Computed as the single integral
    ``1/Gamma(alpha/2) int [p(s, r) - p(t + s, r)] s^{alpha/2 - 1} ds``
    so the two subordinated kernels never get subtracted after rounding.
    Near ``s = 0`` the integrand only decays like ``s^{alpha/2}``, so the
    lower end of ``Q`` is extended at the same step density.
    """
    Q = _prepare(K, alpha, Q)
    if not t > 0:
        raise ExponentError(f"t must be positive, got {t}")
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr <= 0):
        raise ExponentError("difference_kernel needs r > 0")
    out = np.empty(r_arr.shape)
    flat, res = r_arr.ravel(), out.reshape(-1)
    for i, rr in enumerate(flat):
        lo = min(Q.s_min, math.log(t / rr**2) - 2.0 / alpha * math.log(1.0 / DECAY_TARGET))
        steps = max(Q.steps, int(math.ceil((Q.s_max - lo) / Q.du)))
        u, w = QuadratureSpec(lo, Q.s_max, steps).nodes()
        s = rr * rr * np.exp(u)
        integrand = (K.profile(s, rr) - K.profile(t + s, rr)) * s ** (0.5 * alpha)
        res[i] = _trapezoid(integrand, w, "difference_kernel")
    out /= math.gamma(alpha / 2)
    return out if np.ndim(r) else float(out[0])


def partial_k_alpha(K: KernelFamily, alpha: float, r, t_lo: float, t_hi: float, steps: int = 256):
    """Time-window piece ``1/Gamma(alpha/2) int_{t_lo}^{t_hi} p(t, r) t^{alpha/2-1} dt``.

    Uses the trapezoid rule in ``ln t``; it is the kernel of
    :func:`partial_l_alpha` and no decay check applies.
    """
    s, w = _log_time_nodes(t_lo, t_hi, steps)
    t = np.exp(s)
    r = np.asarray(r, dtype=float)
    vals = K.profile(t[None, :], np.atleast_1d(r)[:, None]) * t ** (0.5 * alpha)
    out = (vals @ w) / math.gamma(alpha / 2)
    return out if r.ndim else float(out[0])


def _log_time_nodes(t_lo: float, t_hi: float, steps: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0 < t_lo < t_hi:
        raise QuadratureError(f"need 0 < t_lo < t_hi, got {t_lo}, {t_hi}")
    s = np.linspace(math.log(t_lo), math.log(t_hi), steps + 1)
    ds = s[1] - s[0]
    w = np.full(s.shape, ds)
    w[0] = w[-1] = 0.5 * ds
    return s, w

# }}}


# {{{ operators

@lru_cache(maxsize=32)
def _k_alpha_stencil(spec: GridSpec, alpha: float, K: KernelFamily, Q: QuadratureSpec) -> np.ndarray:
    reach = spec.N - 1
    st = radial_stencil(
        spec, reach, lambda r: np.concatenate([[0.0], k_alpha_profile(K, alpha, r[1:], Q)])
    )
    # origin cell: Riesz cell average rescaled by the kernel ratio near the origin
    r_ref = 0.5 * spec.h
    ratio = k_alpha_profile(K, alpha, r_ref, Q) / riesz_kernel(spec.dim, alpha, r_ref)
    st[(reach,) * spec.dim] = ratio * regularized_riesz(spec.dim, alpha, spec.h)
    st.setflags(write=False)
    return st


def l_alpha_stencil(spec: GridSpec, alpha: float, K: KernelFamily, Q: QuadratureSpec | None = None) -> np.ndarray:
    """Convolution stencil of ``L^{-alpha/2}`` over offsets ``|o_i| < N``."""
    return _k_alpha_stencil(spec, float(alpha), K, _prepare(K, alpha, Q))


def l_alpha(f: GridFunction, alpha: float, K: KernelFamily, Q: QuadratureSpec | None = None) -> GridFunction:
    """Generalized fractional integral ``L^{-alpha/2} f`` via the kernel stencil."""
    if K.dim != f.spec.dim:
        raise ExponentError(f"kernel dim {K.dim} does not match grid dim {f.spec.dim}")
    return convolve(f, l_alpha_stencil(f.spec, alpha, K, Q), f.spec.cell_volume)


def partial_l_alpha(
    f: GridFunction, alpha: float, K: KernelFamily, t_lo: float, t_hi: float, steps: int = 256
) -> GridFunction:
    """Evolution route over a time window: sum of weighted semigroup snapshots.

    Every snapshot goes through :func:`apply_semigroup`, so the window must
    respect the margin.  Matches the convolution with :func:`partial_k_alpha`.
    """
    _check_alpha(f.spec.dim, alpha)
    check_margin(f.spec, t_hi, K)
    s, w = _log_time_nodes(t_lo, t_hi, steps)
    acc = np.zeros(f.spec.shape)
    for si, wi in zip(s, w):
        t = math.exp(si)
        acc += wi * t ** (0.5 * alpha) * apply_semigroup(f, t, K).values
    return GridFunction(f.spec, acc / math.gamma(alpha / 2))


def apply_difference(
    f: GridFunction, alpha: float, t: float, K: KernelFamily, Q: QuadratureSpec | None = None
) -> GridFunction:
    """``(I - e^{-tL}) L^{-alpha/2} f``."""
    g = l_alpha(f, alpha, K, Q)
    return g - apply_semigroup(g, t, K)

# }}}
