"""Index bookkeeping and ratio experiments.

Each boundedness statement ``||T f||_Y <= C ||f||_X`` becomes a table of
observed ratios over a deterministic corpus.  The constant ``C`` is
existential, so the testable surrogate is that the observed maximum is
finite and stable under grid refinement.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from fraclab.commutator import DENOMINATOR_FLOOR, SymbolFunction, higher_commutator
from fraclab.corpus import Corpus, corpus_generate
from fraclab.errors import ExponentError, GridError, IndexWindowError
from fraclab.fracint import QuadratureSpec, fractional_integral, l_alpha
from fraclab.grid import (
    Ball,
    BallLadder,
    GridFunction,
    GridSpec,
    _as_rows,
    _split_centers,
    ball_count,
    ball_fits,
    ball_measure,
    ball_offsets,
    centered_power_sums,
    enumerate_balls,
    family_fingerprint,
)
from fraclab.norms import (
    ball_means,
    campanato_L_norm,
    campanato_norm,
    lp_norm,
    morrey_norm,
    uncentered_means,
)
from fraclab.semigroup import KernelFamily, family_by_name

WINDOW_TOL = 1e-12
DRIFT_BUDGET = 0.10
CSV_HEADER = (
    "experiment", "alpha", "p1", "beta1", "p2", "beta2", "m", "q", "gamma",
    "f_label", "b_label", "lhs", "rhs", "ratio",
)


# {{{ indices

@dataclass(frozen=True)
class IndexSet:
    """Exponents of a commutator estimate with the derived ``q`` and ``gamma``."""

    dim: int
    alpha: float
    p1: float
    beta1: float
    p2: float
    beta2: float
    m: int
    q: float
    gamma: float

    def to_dict(self) -> dict:
        return {
            "dim": self.dim, "alpha": self.alpha, "p1": self.p1, "beta1": self.beta1,
            "p2": self.p2, "beta2": self.beta2, "m": self.m, "q": self.q, "gamma": self.gamma,
        }


def derive_indices(
    alpha: float, p1: float, beta1: float, p2: float, beta2: float, m: int = 1, dim: int = 2
) -> IndexSet:
    """Check the exponent windows and derive ``q`` and ``gamma``.

    ``1/q = m/p1 + 1/p2 - alpha/dim`` and ``gamma = m beta1 + beta2 + alpha``.
    Each violated window raises :class:`IndexWindowError` naming it.
    """
    n = dim
    tol = WINDOW_TOL

    def need(ok: bool, name: str, detail: str) -> None:
        if not ok:
            raise IndexWindowError(name, detail)

    need(int(dim) == dim and dim >= 1, "dim ≥ 1", f"dim={dim}")
    need(0 < alpha < n, "0 < α < dim", f"α={alpha}, dim={n}")
    need(int(m) == m and m >= 1, "m ≥ 1 integer", f"m={m}")
    need(1 < p2 < n / alpha, "1 < p₂ < dim/α", f"p₂={p2}, dim/α={n / alpha:g}")
    need(beta2 >= -n / p2 - tol, "−dim/p₂ ≤ β₂", f"β₂={beta2}, −dim/p₂={-n / p2:g}")
    need(beta2 < -alpha, "β₂ < −α", f"β₂={beta2}, α={alpha}")
    need(1 <= p1 < math.inf, "1 ≤ p₁ < ∞", f"p₁={p1}")
    need(beta1 >= -n / p1 - tol, "−dim/p₁ ≤ β₁", f"β₁={beta1}, −dim/p₁={-n / p1:g}")
    need(beta1 < 0, "β₁ < 0", f"β₁={beta1}")
    inv_q = m / p1 + 1 / p2 - alpha / n
    need(inv_q <= 1 + tol, "q ≥ 1", f"1/q={inv_q:g} (requires m ≤ p₁)")
    q = 1.0 / inv_q
    gamma = m * beta1 + beta2 + alpha
    need(gamma >= -n / q - tol, "−dim/q ≤ γ", f"γ={gamma:g}, −dim/q={-n / q:g}")
    need(gamma < 0, "γ < 0", f"γ={gamma:g}")
    return IndexSet(int(dim), float(alpha), float(p1), float(beta1), float(p2), float(beta2),
                    int(m), q, gamma)


def default_index_sets() -> dict[str, IndexSet]:
    """First-order, second-order and endpoint (``beta2 = -dim/p2``) examples in dim 2."""
    return {
        "commutator-m1": derive_indices(0.5, 4, -0.25, 2, -0.75, 1, 2),
        "commutator-m2": derive_indices(0.5, 4, -0.25, 2, -0.75, 2, 2),
        "commutator-endpoint": derive_indices(0.5, 4, -0.25, 2, -1.0, 1, 2),
    }

# }}}


# {{{ reports

@dataclass(frozen=True)
class RatioRow:
    f_label: str
    b_label: str
    lhs: float
    rhs: float
    ratio: float


@dataclass(frozen=True)
class RatioReport:
    """Observed ratios of one experiment at one resolution.

    ``skipped`` holds the pairs whose denominator fell below the floor;
    rows and skipped pairs together cover every pair exactly once.
    """

    experiment: str
    params: Mapping[str, float]
    rows: tuple[RatioRow, ...]
    skipped: tuple[RatioRow, ...]
    N: int
    fingerprint: str
    index_set: IndexSet | None = None
    flags: tuple[str, ...] = field(default=())

    @property
    def max_ratio(self) -> float:
        return max((r.ratio for r in self.rows), default=math.nan)

    @property
    def pair_count(self) -> int:
        return len(self.rows) + len(self.skipped)

    def argmax(self) -> RatioRow | None:
        if not self.rows:
            return None
        return max(self.rows, key=lambda r: r.ratio)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        p = [_fmt(self.params.get(k)) for k in CSV_HEADER[1:9]]
        for r in self.rows:
            w.writerow([self.experiment, *p, r.f_label, r.b_label, _fmt(r.lhs), _fmt(r.rhs), _fmt(r.ratio)])
        return buf.getvalue()

    def summary(self, drift: float | None = None, passed: bool | None = None) -> dict:
        return {
            "experiment": self.experiment,
            "max_ratio": self.max_ratio,
            "drift": drift,
            "pass": passed,
        }


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _report(experiment, params, rows, skipped, spec, balls, idx=None, flags=()) -> RatioReport:
    if not rows:
        raise GridError(f"{experiment}: no usable pairs ({len(skipped)} skipped)")
    fp = family_fingerprint(spec, balls) if balls else ""
    return RatioReport(experiment, dict(params), tuple(rows), tuple(skipped), spec.N, fp, idx, tuple(flags))


def _ratio_row(f_label: str, b_label: str, lhs: float, rhs: float, rows: list, skipped: list) -> None:
    if rhs < DENOMINATOR_FLOOR:
        skipped.append(RatioRow(f_label, b_label, lhs, rhs, math.nan))
    else:
        rows.append(RatioRow(f_label, b_label, lhs, rhs, lhs / rhs))

# }}}


# {{{ operators

def _route(alpha: float, route: str, K: KernelFamily | None, Q: QuadratureSpec | None):
    if route == "riesz":
        return lambda f: fractional_integral(f, alpha)
    if route == "semigroup":
        if K is None:
            raise GridError("semigroup route needs a kernel family")
        return lambda f: l_alpha(f, alpha, K, Q)
    raise GridError(f"route must be 'riesz' or 'semigroup', got {route!r}")


def hls_experiment(
    alpha: float,
    p: float,
    corpus: Corpus,
    route: str = "riesz",
    K: KernelFamily | None = None,
    Q: QuadratureSpec | None = None,
) -> RatioReport:
    """``||T f||_{L^q} / ||f||_{L^p}`` on the evaluation region, ``1/q = 1/p - alpha/dim``."""
    spec = corpus.members[0].values.spec
    n = spec.dim
    if not 0 < alpha < n:
        raise IndexWindowError("0 < α < dim", f"α={alpha}")
    if not 1 < p < n / alpha:
        raise IndexWindowError("1 < p < dim/α", f"p={p}, dim/α={n / alpha:g}")
    q = 1.0 / (1.0 / p - alpha / n)
    T = _route(alpha, route, K, Q)
    rows, skipped = [], []
    for mem in corpus:
        den = lp_norm(mem.values, p)
        lhs = lp_norm(T(mem.values), q) if den >= DENOMINATOR_FLOOR else 0.0
        _ratio_row(mem.label, "", lhs, den, rows, skipped)
    params = {"alpha": alpha, "p2": p, "q": q}
    return _report(f"hls-{route}", params, rows, skipped, spec, None)


def morrey_experiment(
    alpha: float,
    p: float,
    beta: float,
    corpus: Corpus,
    balls: Sequence[Ball],
    route: str = "riesz",
    K: KernelFamily | None = None,
    Q: QuadratureSpec | None = None,
) -> RatioReport:
    """``||T f||_{M^{q, alpha+beta}} / ||f||_{M^{p, beta}}``."""
    spec = corpus.members[0].values.spec
    n = spec.dim
    if not 0 < alpha < n:
        raise IndexWindowError("0 < α < dim", f"α={alpha}")
    if not 1 < p < n / alpha:
        raise IndexWindowError("1 < p < dim/α", f"p={p}, dim/α={n / alpha:g}")
    if not -n / p - WINDOW_TOL <= beta < -alpha:
        raise IndexWindowError("−dim/p ≤ β < −α", f"β={beta}")
    q = 1.0 / (1.0 / p - alpha / n)
    T = _route(alpha, route, K, Q)
    rows, skipped = [], []
    for mem in corpus:
        den = morrey_norm(mem.values, p, beta, balls).value
        lhs = morrey_norm(T(mem.values), q, alpha + beta, balls).value if den >= DENOMINATOR_FLOOR else 0.0
        _ratio_row(mem.label, "", lhs, den, rows, skipped)
    params = {"alpha": alpha, "p2": p, "beta2": beta, "q": q, "gamma": alpha + beta}
    return _report(f"morrey-{route}", params, rows, skipped, spec, balls)


def commutator_experiment(
    idx: IndexSet,
    f_corpus: Corpus,
    b_corpus: Corpus,
    balls: Sequence[Ball],
    K: KernelFamily,
    target: str = "campanatoL",
    Q: QuadratureSpec | None = None,
    name: str | None = None,
    b_scale: float = 1.0,
    f_scale: float = 1.0,
) -> RatioReport:
    """``||[b, L^{-alpha/2}]^m f||_target / (||b||_{C^{p1,beta1}}^m ||f||_{M^{p2,beta2}})``.

    ``target`` is ``"campanatoL"`` (adapted Campanato ``C_L^{q,gamma}``) or
    ``"morrey"`` (``M^{q,gamma}``).  ``b_scale`` and ``f_scale`` multiply the
    corpus members, for homogeneity checks.
    """
    spec = f_corpus.members[0].values.spec
    if spec != b_corpus.members[0].values.spec:
        raise GridError("f and b corpora live on different grids")
    if idx.dim != spec.dim:
        raise GridError(f"index set is for dim={idx.dim}, grid has dim={spec.dim}")
    if target not in ("campanatoL", "morrey"):
        raise GridError(f"target must be 'campanatoL' or 'morrey', got {target!r}")
    T = lambda g: l_alpha(g, idx.alpha, K, Q)  # noqa: E731
    fs = [(m.label, m.values * f_scale) for m in f_corpus]
    bs = [(m.label, m.values * b_scale) for m in b_corpus]
    fn = {lab: morrey_norm(f, idx.p2, idx.beta2, balls).value for lab, f in fs}
    bn = {lab: campanato_norm(b, idx.p1, idx.beta1, balls).value for lab, b in bs}
    rows, skipped, flags = [], [], set()
    for blab, b in bs:
        sym = SymbolFunction(b, blab)
        for flab, f in fs:
            rhs = bn[blab] ** idx.m * fn[flab]
            if rhs < DENOMINATOR_FLOOR:
                lhs = float(np.max(np.abs(higher_commutator(sym, f, idx.m, T).values))) if b.is_constant() else 0.0
                skipped.append(RatioRow(flab, blab, lhs, rhs, math.nan))
                continue
            g = higher_commutator(sym, f, idx.m, T)
            if target == "morrey":
                est = morrey_norm(g, idx.q, idx.gamma, balls)
            else:
                est = campanato_L_norm(g, idx.q, idx.gamma, balls, K)
                flags.update(est.flags)
            rows.append(RatioRow(flab, blab, est.value, rhs, est.value / rhs))
    exp = name or f"commutator-m{idx.m}-{target}"
    return _report(exp, idx.to_dict(), rows, skipped, spec, balls, idx, sorted(flags))


def inclusion_experiment(
    corpus: Corpus, p: float, gamma: float, K: KernelFamily, balls: Sequence[Ball]
) -> RatioReport:
    """``||f||_{C_L^{p,gamma}} / ||f||_{C^{p,gamma}}``; the maximum is the observed constant."""
    if gamma == 0:
        raise ExponentError("the inclusion of C^{p,γ} in C_L^{p,γ} requires γ ≠ 0")
    if not K.conservative:
        raise ExponentError(f"the inclusion needs a conservative kernel family, {K.name} is not")
    spec = corpus.members[0].values.spec
    rows, skipped, flags = [], [], set()
    for mem in corpus:
        den = campanato_norm(mem.values, p, gamma, balls).value
        est = campanato_L_norm(mem.values, p, gamma, balls, K)
        flags.update(est.flags)
        _ratio_row(mem.label, "", est.value, den, rows, skipped)
    return _report("inclusion", {"q": p, "gamma": gamma}, rows, skipped, spec, balls, flags=sorted(flags))

# }}}


# {{{ dilate-chain oscillation bounds

@dataclass(frozen=True)
class ChainRow:
    b_label: str
    f_label: str
    center: tuple[int, ...]
    radius: float
    k: int
    part: int
    lhs: float
    rhs: float
    ratio: float


@dataclass(frozen=True)
class ChainReport:
    rows: tuple[ChainRow, ...]
    skipped: int
    N: int
    fingerprint: str

    def max_ratio(self, part: int | None = None) -> float:
        vals = [r.ratio for r in self.rows if part is None or r.part == part]
        return max(vals, default=math.nan)

    def passed(self, tol: float = 1e-9) -> bool:
        return bool(self.rows) and self.max_ratio() <= 1 + tol


def _mixed_sums(b: GridFunction, f: GridFunction, radius: float, centers: np.ndarray, means: np.ndarray):
    """``sum_{x in B} |b(x) - c_B| |f(x)|`` for equal-radius balls."""
    bv, fv = _as_rows(b.values), _as_rows(np.abs(f.values))
    ci, cj = _split_centers(centers)
    acc = np.zeros(len(ci))
    for o in ball_offsets(b.spec, radius):
        di, dj = (0, o[0]) if b.spec.dim == 1 else (o[0], o[1])
        acc += np.abs(bv[ci + di, cj + dj] - means) * fv[ci + di, cj + dj]
    return acc


def dilate_chain_check(
    b_corpus: Corpus,
    f_corpus: Corpus,
    p1: float,
    beta1: float,
    p2: float,
    beta2: float,
    k_max: int = 3,
    base: BallLadder | None = None,
) -> ChainReport:
    """Oscillation bounds over dilate chains ``B, 2B, ..., 2^k B``.

    For each base ball ``B`` and ``k <= k_max``:

    1. ``mean_B |b - b_B| <= m(B)^{beta1/n} ||b||``;
    2. ``mean_{2^k B} |b - b_B| <= c_k m(2^k B)^{beta1/n} ||b||``;
    3. ``mean_{2^k B} |b - b_B||f| <= c_k m(2^k B)^{(beta1+beta2)/n} ||b|| ||f||``;

    with ``c_k = (2^n + 1) k`` for ``k >= 1`` and ``c_0 = 1``.  The norms are
    measured on the family of all base balls and their dilates.
    """
    spec = b_corpus.members[0].values.spec
    n = spec.dim
    if spec != f_corpus.members[0].values.spec:
        raise GridError("f and b corpora live on different grids")
    if not (1 <= p1 and -n / p1 - WINDOW_TOL <= beta1 < 0):
        raise IndexWindowError("1 ≤ p₁, −dim/p₁ ≤ β₁ < 0", f"p₁={p1}, β₁={beta1}")
    if not (1 <= p2 and -n / p2 - WINDOW_TOL <= beta2 < 0):
        raise IndexWindowError("1 ≤ p₂, −dim/p₂ ≤ β₂ < 0", f"p₂={p2}, β₂={beta2}")
    if 1 / p1 + 1 / p2 > 1:
        raise IndexWindowError("1/p₁ + 1/p₂ ≤ 1", f"1/p₁ + 1/p₂ = {1 / p1 + 1 / p2:g}")
    base = base or BallLadder(spec.h, 2.0, 1, 1)
    chain = [2.0**k for k in range(int(k_max) + 1)]
    bases = [
        b for b in enumerate_balls_loose(spec, base)
        if ball_fits(spec, b.dilate(chain[-1]))
    ]
    if not bases:
        raise GridError(f"no base ball has its {chain[-1]:g}-dilate inside the evaluation region")
    family = [b.dilate(c) for c in chain for b in bases]
    rows, skipped = [], 0
    f_norms = {m.label: morrey_norm(m.values, p2, beta2, family).value for m in f_corpus}
    for bm in b_corpus:
        b = bm.values
        b_norm = campanato_norm(b, p1, beta1, family).value
        radii = sorted({x.radius for x in bases})
        for r0 in radii:
            group = [x for x in bases if x.radius == r0]
            centers = np.array([x.center for x in group])
            b_B = ball_means(b, group)
            for k, c in enumerate(chain):
                r = r0 * c
                cnt = ball_count(spec, r)
                meas = ball_measure(spec, r)
                ck = 1.0 if k == 0 else (2**n + 1) * k
                lhs2 = centered_power_sums(b, r, centers, b_B, 1.0) / cnt
                rhs2 = ck * meas ** (beta1 / n) * b_norm
                parts = [(2, lhs2, rhs2)]
                if k == 0:
                    parts.append((1, lhs2, meas ** (beta1 / n) * b_norm))
                for part, lhs, rhs in parts:
                    for i, x in enumerate(group):
                        if rhs < DENOMINATOR_FLOOR:
                            skipped += 1
                            continue
                        rows.append(ChainRow(bm.label, "", x.center, r0, k, part, float(lhs[i]), rhs, float(lhs[i]) / rhs))
                for fm in f_corpus:
                    lhs3 = _mixed_sums(b, fm.values, r, centers, b_B) / cnt
                    rhs3 = ck * meas ** ((beta1 + beta2) / n) * b_norm * f_norms[fm.label]
                    for i, x in enumerate(group):
                        if rhs3 < DENOMINATOR_FLOOR:
                            skipped += 1
                            continue
                        rows.append(ChainRow(bm.label, fm.label, x.center, r0, k, 3, float(lhs3[i]), rhs3, float(lhs3[i]) / rhs3))
    return ChainReport(tuple(rows), skipped, spec.N, family_fingerprint(spec, family))


def enumerate_balls_loose(spec: GridSpec, ladder: BallLadder) -> list[Ball]:
    """Like :func:`enumerate_balls` but returns an empty list instead of raising."""
    try:
        return enumerate_balls(spec, ladder)
    except GridError:
        return []

# }}}


# {{{ experiment setups and refinement

@dataclass(frozen=True)
class ExperimentSetup:
    """Grid, ladder and corpus seed given at a reference resolution.

    :meth:`at` rescales margin and center stride with ``N`` so the region,
    the radii and the ball centers stay physically fixed.
    """

    spec: GridSpec
    ladder: BallLadder
    seed: int = 0
    kernel: str = "heat"
    quad: QuadratureSpec | None = None

    def at(self, N: int) -> ExperimentSetup:
        spec = self.spec.scaled(N)
        stride = self.ladder.stride * N / self.spec.N
        if stride != int(stride) or stride < 1:
            raise GridError(f"stride {self.ladder.stride} at N={self.spec.N} does not rescale to N={N}")
        return replace(self, spec=spec, ladder=replace(self.ladder, stride=int(stride)))

    @property
    def balls(self) -> list[Ball]:
        return enumerate_balls(self.spec, self.ladder)

    @property
    def K(self) -> KernelFamily:
        return family_by_name(self.kernel, self.spec.dim)

    def corpus(self, role: str) -> Corpus:
        return corpus_generate(self.seed, self.spec, role)


def default_setup(dim: int = 2, N: int = 64, seed: int = 0) -> ExperimentSetup:
    """Reference geometry: box ``[-1, 1]^dim`` with region half width 1/4.

    The margin is 3/8 of the box per side so ``e^{-r^2 L}`` snapshots stay
    admissible for the largest radius ``3/32``.
    """
    if N < 64 or N % 64:
        raise GridError(f"default setup needs N a multiple of 64, got {N}")
    base = ExperimentSetup(GridSpec(dim, 1.0, 64, 24), BallLadder(0.046875, 2.0, 2, 2), seed)
    return base.at(N) if N != 64 else base


@dataclass(frozen=True)
class StabilityReport:
    experiment: str
    resolutions: tuple[int, ...]
    max_ratios: tuple[float, ...]
    drift: float | None
    budget: float
    status: str

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "resolutions": list(self.resolutions),
            "max_ratios": list(self.max_ratios),
            "drift": self.drift,
            "budget": self.budget,
            "status": self.status,
        }


def relative_drift(values: Sequence[float]) -> float:
    """Largest relative change between consecutive entries."""
    v = [float(x) for x in values]
    out = 0.0
    for a, b in zip(v, v[1:]):
        if a == b:
            continue
        out = max(out, abs(b - a) / max(abs(a), abs(b)) if a == 0 or b == 0 else abs(b - a) / abs(a))
    return out


def refinement_study(
    experiment: str,
    run: Callable[[int], RatioReport],
    resolutions: Sequence[int],
    budget: float = DRIFT_BUDGET,
) -> tuple[StabilityReport, list[RatioReport]]:
    """Run ``run(N)`` per resolution and compare the max ratios."""
    for N in resolutions:
        if N < 16 or N & (N - 1):
            raise GridError(f"N must be a power of two >= 16, got {N}")
    reports = [run(int(N)) for N in resolutions]
    maxima = tuple(r.max_ratio for r in reports)
    if len(resolutions) < 2:
        return StabilityReport(experiment, tuple(resolutions), maxima, None, budget, "insufficient data"), reports
    drift = relative_drift(maxima)
    ok = all(np.isfinite(maxima)) and drift < budget
    return StabilityReport(experiment, tuple(resolutions), maxima, drift, budget, "pass" if ok else "fail"), reports

# }}}


def summary_json(stability: StabilityReport, report: RatioReport) -> str:
    return json.dumps(report.summary(stability.drift, stability.passed), sort_keys=True)
