"""Gaussian-bounded kernel families and the semigroup action on grids.

A kernel family is a radial profile ``p(t, r)`` together with the constants
of its Gaussian upper bound ``|p(t, r)| <= C t^{-dim/2} exp(-A r^2 / t)``.
The semigroup acts on grid functions by linear convolution with the
sampled profile, the function being zero outside the box.

Two distances matter for a time ``t``:

* the stencil reach, where the Gaussian factor of the bound drops below
  ``1e-16``; kernel values further out are dropped;
* the margin reach ``4*sqrt(t/A)`` (factor ``e^-16``), which has to fit in the
  grid margin so that outputs on the evaluation region only depend on
  values that are actually stored.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from fraclab.conv import convolve, radial_stencil, stencil_distances
from fraclab.errors import KernelError, MarginError
from fraclab.grid import GridFunction, GridSpec

STENCIL_FLOOR = 1e-16
MARGIN_DECAY = 16.0
MIN_RESOLVED_T = 4.0  # in units of h^2


@dataclass(frozen=True)
class MajorantProfile:
    """Radial majorant ``h_t(x, y) = t^{-dim/2} g(|x - y| / sqrt(t))``."""

    g: Callable[[np.ndarray], np.ndarray]
    epsilon: float
    dim: int = 1

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise KernelError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True, eq=False)
class KernelFamily:
    """Radial kernel ``profile(t, r)`` with declared Gaussian constants.

    ``log_profile(log_t, r)`` is optional and returns ``ln p``; when present
    validators and time quadratures work in log space and never over- or
    underflow.
    """

    dim: int
    profile: Callable[[np.ndarray, np.ndarray], np.ndarray]
    gaussian_C: float
    gaussian_A: float
    is_semigroup: bool = True
    conservative: bool = True
    name: str = "kernel"
    log_profile: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise KernelError(f"dim must be 1 or 2, got {self.dim}")
        if not (self.gaussian_C > 0 and self.gaussian_A > 0):
            raise KernelError("Gaussian constants C and A must be positive")

    def __call__(self, t, r):
        return self.profile(t, r)

    def stencil_radius(self, t: float) -> float:
        """Distance beyond which the Gaussian factor is below ``1e-16``."""
        return float(np.sqrt(t * np.log(1.0 / STENCIL_FLOOR) / self.gaussian_A))

    def margin_radius(self, t: float) -> float:
        """Distance at which the Gaussian factor equals ``e^-16``."""
        return float(np.sqrt(MARGIN_DECAY * t / self.gaussian_A))

    def majorant(self) -> MajorantProfile:
        C, A = self.gaussian_C, self.gaussian_A
        return MajorantProfile(lambda u: C * np.exp(-A * np.asarray(u) ** 2), 1.0, self.dim)

    def scaled(self, factor: float, name: str | None = None) -> KernelFamily:
        """Family with profile multiplied by ``factor`` (declared constants kept)."""
        prof = self.profile
        return KernelFamily(
            self.dim,
            lambda t, r: factor * prof(t, r),
            self.gaussian_C,
            self.gaussian_A,
            self.is_semigroup and factor == 1.0,
            self.conservative and factor == 1.0,
            name or f"{factor:g}*{self.name}",
        )

    def with_constants(self, C: float | None = None, A: float | None = None) -> KernelFamily:
        return KernelFamily(
            self.dim,
            self.profile,
            self.gaussian_C if C is None else C,
            self.gaussian_A if A is None else A,
            self.is_semigroup,
            self.conservative,
            self.name,
            self.log_profile,
        )


def heat_kernel_family(dim: int, a: float = 1.0) -> KernelFamily:
    """Heat kernel of ``-a*Laplacian``: ``(4 pi a t)^{-dim/2} exp(-r^2/(4 a t))``."""
    if not a > 0:
        raise KernelError(f"diffusion coefficient must be positive, got {a}")
    a = float(a)
    C = (4.0 * np.pi * a) ** (-dim / 2)

    def profile(t, r):
        t = np.asarray(t, dtype=float)
        r = np.asarray(r, dtype=float)
        return (4.0 * np.pi * a * t) ** (-dim / 2) * np.exp(-(r * r) / (4.0 * a * t))

    def log_profile(log_t, r):
        log_t = np.asarray(log_t, dtype=float)
        r = np.asarray(r, dtype=float)
        return -0.5 * dim * (np.log(4.0 * np.pi * a) + log_t) - (r * r) / (4.0 * a) * np.exp(-log_t)

    name = "heat" if a == 1.0 else f"heat-a{a:g}"
    return KernelFamily(dim, profile, C, 1.0 / (4.0 * a), True, True, name, log_profile)


_NAME_RE = re.compile(r"^heat(?:-a(?P<a>[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?))?$")


def family_by_name(name: str, dim: int) -> KernelFamily:
    """Resolve ``"heat"`` or ``"heat-a<diffusion>"``, e.g. ``"heat-a0.5"``."""
    m = _NAME_RE.match(name.strip())
    if m is None:
        raise KernelError(f"unknown kernel family '{name}'")
    a = float(m.group("a")) if m.group("a") else 1.0
    return heat_kernel_family(dim, a)


# {{{ semigroup action

def check_margin(spec: GridSpec, t: float, K: KernelFamily) -> None:
    if not t > 0:
        raise MarginError(f"time must be positive, got {t}")
    reach = K.margin_radius(t)
    if reach > spec.margin * spec.h * (1 + 1e-12):
        raise MarginError(
            f"margin too small for this t: t={t:.6g} needs {reach:.6g} "
            f"but margin is {spec.margin * spec.h:.6g}"
        )


def is_under_resolved(spec: GridSpec, t: float) -> bool:
    """Times below ``4 h^2`` sample the kernel with too few nodes per width."""
    return t < MIN_RESOLVED_T * spec.h**2 * (1 - 1e-12)


def semigroup_stencil(spec: GridSpec, t: float, K: KernelFamily) -> np.ndarray:
    reach = min(int(np.ceil(K.stencil_radius(t) / spec.h)), spec.N - 1)
    st = radial_stencil(spec, reach, lambda r: K.profile(t, r))
    # drop values past the truncation radius so the stencil is spherical
    d = np.sqrt(stencil_distances(spec, reach)) * spec.h
    st[d > K.stencil_radius(t)] = 0.0
    return st


def apply_semigroup(f: GridFunction, t: float, K: KernelFamily) -> GridFunction:
    """``h^dim * sum_y p(t, |x - y|) f(y)``, valid on the evaluation region."""
    if K.dim != f.spec.dim:
        raise KernelError(f"kernel dim {K.dim} does not match grid dim {f.spec.dim}")
    check_margin(f.spec, t, K)
    return convolve(f, semigroup_stencil(f.spec, t, K), f.spec.cell_volume)


def kernel_mass(K: KernelFamily, t: float, spec: GridSpec) -> float:
    """Discrete mass ``h^dim * sum_z p(t, |z|)`` of the truncated stencil."""
    check_margin(spec, t, K)
    return float(spec.cell_volume * semigroup_stencil(spec, t, K).sum())


def semigroup_law_deviation(f: GridFunction, t1: float, t2: float, K: KernelFamily) -> float:
    """Sup over the evaluation region of ``|P_t2 P_t1 f - P_(t1+t2) f|``."""
    if not K.is_semigroup:
        raise KernelError(f"family '{K.name}' is not declared a semigroup")
    two = apply_semigroup(apply_semigroup(f, t1, K), t2, K)
    one = apply_semigroup(f, t1 + t2, K)
    return float(np.max(np.abs((two - one).region_values())))

# }}}


# {{{ validators

@dataclass(frozen=True)
class BoundReport:
    name: str
    worst_t: float
    worst_r: float
    ratio: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "worst_t": self.worst_t,
            "worst_r": self.worst_r,
            "ratio": self.ratio,
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def validate_gaussian_bound(K: KernelFamily, t_samples, r_samples) -> BoundReport:
    """Largest ``|p| t^{dim/2} exp(A r^2/t) / C`` over the sample product."""
    ts = np.asarray(t_samples, dtype=float).ravel()
    rs = np.asarray(r_samples, dtype=float).ravel()
    if ts.size == 0 or rs.size == 0:
        raise KernelError("validator needs nonempty t and r samples")
    T, R = np.meshgrid(ts, rs, indexing="ij")
    expo = 0.5 * K.dim * np.log(T) + K.gaussian_A * R * R / T - np.log(K.gaussian_C)
    if K.log_profile is not None:
        log_ratio = K.log_profile(np.log(T), R) + expo
    else:
        p = np.abs(K.profile(T, R))
        with np.errstate(divide="ignore"):
            log_ratio = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)) + expo, -np.inf)
    k = np.unravel_index(int(np.argmax(log_ratio)), log_ratio.shape)
    with np.errstate(over="ignore"):
        worst = float(np.exp(log_ratio[k]))
    return BoundReport(K.name, float(T[k]), float(R[k]), worst, bool(worst <= 1 + 1e-9))


@dataclass(frozen=True)
class IdentityReport:
    passed: bool
    final_over_max: float
    interval: tuple[float, float] | None

    def to_dict(self) -> dict:
        return {"pass": self.passed, "final_over_max": self.final_over_max, "interval": self.interval}


def validate_approx_identity(m: MajorantProfile, u_samples) -> IdentityReport:
    """Check that ``u^{dim+eps} g(u)`` decays on the top decade of samples.

    The samples must be positive, increasing and span at least three
    decades.  On failure ``interval`` is the first pair of samples where the
    weighted profile fails to decrease.
    """
    u = np.asarray(u_samples, dtype=float).ravel()
    if u.size < 2 or np.any(u <= 0) or np.any(np.diff(u) <= 0):
        raise KernelError("u samples must be positive and strictly increasing")
    if np.log10(u[-1] / u[0]) < 3 - 1e-12:
        raise KernelError("u samples must span at least three decades")
    g = np.asarray(m.g(u), dtype=float)
    w = u ** (m.dim + m.epsilon) * g
    top = u >= u[-1] / 10
    wt, ut = w[top], u[top]
    bad = np.nonzero((np.diff(wt) >= 0) & (wt[1:] > 0))[0]
    final_over_max = float(w[-1] / np.max(w)) if np.max(w) > 0 else 0.0
    if bad.size:
        i = int(bad[0])
        return IdentityReport(False, final_over_max, (float(ut[i]), float(ut[i + 1])))
    if not final_over_max < 1e-6:
        return IdentityReport(False, final_over_max, (float(ut[0]), float(ut[-1])))
    return IdentityReport(True, final_over_max, None)

# }}}
