"""Fast invariant suite behind ``fraclab verify``.

Each check returns a :class:`Check` with the observed figure and the budget
it is held to.  The suite is fixed apart from the kernel family and seed,
so its output is a deterministic function of the configuration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from fraclab.commutator import higher_commutator, kernel_commutator, riesz_operator
from fraclab.corpus import corpus_generate
from fraclab.fracint import (
    QuadratureSpec,
    difference_kernel,
    fractional_integral,
    k_alpha_profile,
    l_alpha,
    riesz_kernel,
)
from fraclab.grid import BallLadder, GridSpec, ball_lp_mean, enumerate_balls
from fraclab.harness import dilate_chain_check
from fraclab.norms import bmo_norm, campanato_norm, centered_means, uncentered_means
from fraclab.semigroup import KernelFamily, family_by_name, kernel_mass, semigroup_law_deviation


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    observed: float
    budget: float

    def to_dict(self) -> dict:
        return {"name": self.name, "pass": self.passed, "observed": self.observed, "budget": self.budget}


def _le(name: str, observed: float, budget: float) -> Check:
    observed = float(observed)
    return Check(name, bool(np.isfinite(observed) and observed <= budget), observed, float(budget))


def subordination_error(dim: int, alpha: float, K: KernelFamily, L: float = 1.0, N: int = 64) -> float:
    """Max relative gap between the subordinated kernel and ``I_alpha`` on ``[h, L/2]``."""
    h = 2 * L / N
    r = np.geomspace(h, L / 2, 200)
    k = k_alpha_profile(K, alpha, r)
    return float(np.max(np.abs(k / riesz_kernel(dim, alpha, r) - 1)))


def route_error(spec: GridSpec, alpha: float, K: KernelFamily, seed: int = 0) -> float:
    """Max over the f-corpus of the relative L2 gap between ``L^{-alpha/2}`` and ``I_alpha``."""
    worst = 0.0
    sl = spec.region_slice
    for m in corpus_generate(seed, spec, "f"):
        a = l_alpha(m.values, alpha, K).values[sl]
        b = fractional_integral(m.values, alpha).values[sl]
        worst = max(worst, float(np.linalg.norm(a - b) / np.linalg.norm(b)))
    return worst


def semigroup_errors(spec: GridSpec, K: KernelFamily, seed: int = 0) -> tuple[float, float]:
    """``(law, mass)`` deviations for admissible times ``t in [4h^2, (Mh/8)^2]``."""
    t_hi = (spec.margin * spec.h / 8) ** 2
    t_lo = 4 * spec.h**2
    ts = np.geomspace(t_lo, t_hi, 5)
    mass = max(abs(kernel_mass(K, t, spec) - 1) for t in ts)
    law = 0.0
    for m in list(corpus_generate(seed, spec, "f"))[1:4]:
        for t1, t2 in itertools.combinations(ts[:-1], 2):
            if t1 + t2 <= t_hi:
                law = max(law, semigroup_law_deviation(m.values, t1, t2, K))
        law = max(law, semigroup_law_deviation(m.values, t_hi / 2, t_hi / 2, K))
    return law, mass


def difference_kernel_sup(K: KernelFamily, alpha: float, Q: QuadratureSpec | None = None) -> float:
    """Sup of ``|D_t(r)| r^{n+2-alpha} / t`` over a 12x12 log grid with ``r^2 >= 4t``."""
    Q = Q or QuadratureSpec.default(K.dim, alpha, K.gaussian_A)
    best = 0.0
    for t in np.geomspace(1e-4, 1e-1, 12):
        rs = np.geomspace(1e-2, 1.0, 12)
        rs = rs[rs * rs >= 4 * t]
        if rs.size:
            d = difference_kernel(K, alpha, float(t), rs, Q)
            best = max(best, float(np.max(np.abs(d) * rs ** (K.dim + 2 - alpha) / t)))
    return best


def difference_kernel_change(K: KernelFamily, alpha: float) -> tuple[float, float]:
    Q = QuadratureSpec.default(K.dim, alpha, K.gaussian_A)
    a = difference_kernel_sup(K, alpha, Q)
    b = difference_kernel_sup(K, alpha, Q.refined(2))
    return a, abs(b - a) / a


def commutator_route_error(N: int = 64, alpha: float = 0.4, seed: int = 0) -> float:
    """Max relative sup gap between the recurrence and the dense kernel form, ``m = 1..3``."""
    spec = GridSpec(1, 1.0, N, 0)
    T = riesz_operator(alpha, 1)
    fs, bs = corpus_generate(seed, spec, "f"), corpus_generate(seed, spec, "b")
    worst = 0.0
    for bm in bs:
        for fm in fs:
            for m in (1, 2, 3):
                a = higher_commutator(bm.values, fm.values, m, T).values
                b = kernel_commutator(bm.values, fm.values, m, T).values
                scale = max(float(np.max(np.abs(b))), 1e-300)
                worst = max(worst, float(np.max(np.abs(a - b))) / scale if np.any(b) else float(np.max(np.abs(a))))
    return worst


def dilate_chain_max(dim: int, seed: int = 0) -> float:
    N = 64 if dim == 1 else 32
    spec = GridSpec(dim, 1.0, N, 2)
    p1, beta1, p2, beta2 = 4.0, -0.2, 2.0, -0.4 * dim
    rep = dilate_chain_check(
        corpus_generate(seed, spec, "b"), corpus_generate(seed, spec, "f"),
        p1, beta1, p2, beta2, 3, BallLadder(1.5 * spec.h, 1.5, 2, 1),
    )
    return rep.max_ratio()


def estimator_oracle_error(dim: int, seed: int = 0) -> tuple[float, bool]:
    """Prefix-sum ball means against per-ball brute force; exact BMO specialization."""
    spec = GridSpec(dim, 1.0, 32, 2)
    balls = enumerate_balls(spec, BallLadder(spec.h, 2.0, 3, 3))
    worst, exact = 0.0, True
    for m in corpus_generate(seed, spec, "b"):
        f = m.values
        for p in (1.0, 2.5):
            brute_u = np.array([ball_lp_mean(f, b, p, False) for b in balls])
            brute_c = np.array([ball_lp_mean(f, b, p, True) for b in balls])
            fast_u, fast_c = uncentered_means(f, balls, p), centered_means(f, balls, p)
            scale = max(float(np.max(np.abs(f.values))), 1e-300)
            worst = max(worst, float(np.max(np.abs(brute_u - fast_u))) / scale,
                        float(np.max(np.abs(brute_c - fast_c))) / scale)
        exact &= campanato_norm(f, 1.0, 0.0, balls).value == bmo_norm(f, balls).value
    return worst, exact


def run_verify(kernel: str = "heat", seed: int = 0) -> list[Check]:
    """All checks at their budgets, in a fixed order."""
    out = []
    for dim in (1, 2):
        K = family_by_name(kernel, dim)
        alphas = (0.4, dim / 2) if dim == 1 else (0.4, 1.0)
        if K.name == "heat":
            err = max(subordination_error(dim, a, K) for a in alphas)
            out.append(_le(f"subordination-dim{dim}", err, 1e-8))
        spec = GridSpec(dim, 1.0, 256 if dim == 1 else 128, 0)
        if K.name == "heat":
            out.append(_le(f"route-equivalence-dim{dim}", route_error(spec, 0.5, K, seed), 1e-3))
        sg = GridSpec(dim, 1.0, 64, 24)
        law, mass = semigroup_errors(sg, K, seed)
        out.append(_le(f"semigroup-law-dim{dim}", law, 1e-8))
        out.append(_le(f"kernel-mass-dim{dim}", mass, 1e-8))
        sup, change = difference_kernel_change(K, 0.5)
        out.append(_le(f"difference-kernel-refinement-dim{dim}", change, 0.05))
        out.append(_le(f"dilate-chain-dim{dim}", dilate_chain_max(dim, seed), 1 + 1e-9))
        err, exact = estimator_oracle_error(dim, seed)
        out.append(_le(f"estimator-oracles-dim{dim}", err, 1e-12))
        out.append(Check(f"campanato-bmo-dim{dim}", exact, 0.0 if exact else 1.0, 0.0))
    out.append(_le("commutator-routes-dim1", commutator_route_error(seed=seed), 1e-10))
    return out
