import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclab.errors import ExponentError, GridError, MarginError
from fraclab.grid import Ball, BallLadder, GridFunction, GridSpec, ball_points, enumerate_balls, sample
from fraclab.norms import (
    adapted_means,
    bmo_L_norm,
    bmo_norm,
    campanato_L_norm,
    campanato_norm,
    centered_means,
    lip_estimate,
    lip_norm,
    lp_norm,
    morrey_norm,
    rh_infty_ratio,
    semigroup_snapshots,
    sharp_maximal_L,
    type_norm,
    type_tail_weight,
    uncentered_means,
)
from fraclab.semigroup import apply_semigroup, heat_kernel_family

SPEC32 = {1: GridSpec(1, 1.0, 32, 2), 2: GridSpec(2, 1.0, 32, 2)}


def family(spec, r_min=None, ratio=2.0, count=3, stride=1):
    return enumerate_balls(spec, BallLadder(r_min or spec.h, ratio, count, stride))


def ball_values(f, ball):
    pts = ball_points(f.spec, ball)
    return f.values[tuple(pts.T)]


def weight(spec, ball, exponent):
    return (len(ball_points(spec, ball)) * spec.cell_volume) ** (-exponent / spec.dim)


def random_function(spec, rng):
    return GridFunction(spec, rng.standard_normal(spec.shape))


class TestLp:
    def test_constant_region(self):
        spec = GridSpec(2, 1.0, 32, 4)
        f = sample(lambda x, y: np.ones_like(x), spec)
        V = (spec.N - 2 * spec.margin + 1) ** 2 * spec.cell_volume
        assert lp_norm(f, 3.0) == pytest.approx(V ** (1 / 3), rel=1e-14)

    def test_scaling_and_direct_sum(self, rng):
        spec = SPEC32[2]
        f = random_function(spec, rng)
        assert lp_norm(2 * f, 2.0) == pytest.approx(2 * lp_norm(f, 2.0), rel=1e-14)
        ref = math.sqrt(sum(v * v for v in f.region_values().ravel()) * spec.h**2)
        assert lp_norm(f, 2.0) == pytest.approx(ref, rel=1e-12)
        assert lp_norm(f, np.inf, region=False) == np.abs(f.values).max()

    def test_rejects_small_p(self, spec1):
        with pytest.raises(ExponentError):
            lp_norm(sample(lambda x: x, spec1), 0.9)


class TestBruteForce:
    """Every per-ball estimator against direct per-ball evaluation."""

    @pytest.mark.parametrize("dim", [1, 2])
    @pytest.mark.parametrize("p", [1.0, 1.5, 3.0])
    def test_means(self, dim, p, rng):
        spec = SPEC32[dim]
        f = random_function(spec, rng)
        balls = family(spec, stride=3)
        unc = uncentered_means(f, balls, p)
        cen = centered_means(f, balls, p)
        for k, b in enumerate(balls):
            v = ball_values(f, b)
            assert unc[k] == pytest.approx(np.mean(np.abs(v) ** p) ** (1 / p), rel=1e-12)
            assert cen[k] == pytest.approx(np.mean(np.abs(v - v.mean()) ** p) ** (1 / p), rel=1e-12)

    @pytest.mark.parametrize("dim", [1, 2])
    def test_norm_values(self, dim, rng):
        spec = SPEC32[dim]
        f = random_function(spec, rng)
        balls = family(spec, stride=2)
        p, beta = 2.0, -0.3
        morrey = max(weight(spec, b, beta) * np.sqrt(np.mean(ball_values(f, b) ** 2)) for b in balls)
        camp = max(
            weight(spec, b, 0.5) * np.sqrt(np.mean((ball_values(f, b) - ball_values(f, b).mean()) ** 2))
            for b in balls
        )
        bmo = max(np.mean(np.abs(ball_values(f, b) - ball_values(f, b).mean())) for b in balls)
        assert morrey_norm(f, p, beta, balls).value == pytest.approx(morrey, rel=1e-12)
        assert campanato_norm(f, p, 0.5, balls).value == pytest.approx(camp, rel=1e-12)
        assert bmo_norm(f, balls).value == pytest.approx(bmo, rel=1e-12)

    @pytest.mark.parametrize("dim", [1, 2])
    def test_adapted_and_sharp_maximal(self, dim, rng):
        spec = GridSpec(dim, 1.0, 32, 12)
        K = heat_kernel_family(dim)
        f = random_function(spec, rng)
        balls = family(spec, r_min=1.0 * spec.h, ratio=1.5, count=2, stride=1)
        snaps = {r: apply_semigroup(f, r * r, K) for r in {b.radius for b in balls}}
        means = adapted_means(f, balls, 1.0, K)
        per_ball = np.array([np.mean(np.abs(ball_values(f - snaps[b.radius], b))) for b in balls])
        np.testing.assert_allclose(means, per_ball, rtol=1e-12, atol=0)

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            field = sharp_maximal_L(f, K, balls).field.values
        brute = np.zeros(spec.shape)
        for k, b in enumerate(balls):
            for idx in map(tuple, ball_points(spec, b)):
                brute[idx] = max(brute[idx], per_ball[k])
        np.testing.assert_allclose(field, brute, rtol=1e-12, atol=0)
        assert bmo_L_norm(f, K, balls) == pytest.approx(brute[spec.region_slice].max(), rel=1e-12)

    @pytest.mark.parametrize("dim", [1, 2])
    def test_campanato_p1_beta0_is_bmo(self, dim, rng):
        spec = SPEC32[dim]
        f = random_function(spec, rng)
        balls = family(spec)
        assert campanato_norm(f, 1.0, 0.0, balls).value == bmo_norm(f, balls).value


class TestExamples:
    def test_bmo_constant_and_shift(self, spec2, rng):
        balls = family(spec2)
        assert bmo_norm(sample(lambda x, y: np.full_like(x, 4.0), spec2), balls).value == 0.0
        f = random_function(spec2, rng)
        assert bmo_norm(f + 7.0, balls).value == pytest.approx(bmo_norm(f, balls).value, rel=1e-12)

    def test_bmo_step(self):
        # one lattice ball of k nodes on either side of x = 0 with the jump at the centre:
        # direct computation gives 2 k (k + 1) / (2k + 1)^2 per unit jump, which tends to 1/2
        spec = GridSpec(1, 1.0, 64, 2)
        f = sample(lambda x: np.where(x >= 0, 1.0, 0.0), spec)
        for k in (1, 3, 6):
            est = bmo_norm(f, [Ball((32,), (k + 0.5) * spec.h)])
            v = ball_values(f, Ball((32,), (k + 0.5) * spec.h))
            assert est.value == pytest.approx(np.mean(np.abs(v - v.mean())), rel=1e-14)
        assert bmo_norm(f, [Ball((32,), 6.5 * spec.h)]).value == pytest.approx(2 * 42 / 169, rel=1e-13)
        big = bmo_norm(f, family(spec, spec.h, 2.0, 4))
        assert 0.4 < big.value <= 0.5

    def test_campanato_affine(self):
        # centred mean of a*x over 2k+1 nodes is |a| h k (k + 1) / (2k + 1)
        spec = GridSpec(1, 1.0, 64, 2)
        a = -3.0
        f = sample(lambda x: a * x, spec)
        for k in (1, 4, 10):
            est = campanato_norm(f, 1.0, 1.0, [Ball((32,), (k + 0.5) * spec.h)])
            assert est.value == pytest.approx(abs(a) * k * (k + 1) / (2 * k + 1) ** 2, rel=1e-12)

    def test_campanato_constant(self, spec2):
        f = sample(lambda x, y: np.full_like(x, 2.5), spec2)
        assert campanato_norm(f, 2.0, 0.5, family(spec2)).value == 0.0

    def test_morrey_constant_largest_ball(self, spec2):
        # the weight m(B)^{-beta/dim} grows with the ball for beta < 0
        f = sample(lambda x, y: np.full_like(x, 3.0), spec2)
        balls = family(spec2)
        est = morrey_norm(f, 2.0, -0.5, balls)
        r0 = max(b.radius for b in balls)
        assert est.argmax_ball.radius == r0
        assert est.value == pytest.approx(3.0 * weight(spec2, est.argmax_ball, -0.5), rel=1e-14)

    def test_morrey_endpoints(self, rng):
        spec = GridSpec(2, 1.0, 32, 2)
        f = random_function(spec, rng)
        balls = family(spec)
        p = 2.0
        local = morrey_norm(f, p, -spec.dim / p, balls).value
        assert local <= lp_norm(f, p, region=False) * (1 + 1e-12)
        assert morrey_norm(f, p, 0.0, balls).value <= np.abs(f.values).max()

    def test_morrey_beta_zero_refines_to_sup(self):
        # smallest balls shrink to three nodes, so the beta = 0 value tends to the sup at rate h^2
        gaps = []
        for N in (32, 64, 128, 256):
            spec = GridSpec(1, 1.0, N, N // 8)
            f = sample(lambda x: np.exp(-8 * x * x), spec)
            gaps.append(1 - morrey_norm(f, 2.0, 0.0, family(spec, 1.5 * spec.h, 2.0, 2)).value)
        assert all(g > 0 for g in gaps)
        for a, b in zip(gaps, gaps[1:]):
            assert 3.8 < a / b < 4.2

    def test_windows(self, spec2):
        f = sample(lambda x, y: x, spec2)
        balls = family(spec2)
        with pytest.raises(ExponentError):
            morrey_norm(f, 2.0, 0.1, balls)
        with pytest.raises(ExponentError):
            morrey_norm(f, 2.0, -1.5, balls)
        with pytest.raises(ExponentError):
            campanato_norm(f, 2.0, 1.2, balls)
        with pytest.raises(ExponentError):
            campanato_L_norm(f, 2.0, -1.5, balls, heat_kernel_family(2))
        with pytest.raises(GridError):
            bmo_norm(f, [])

    def test_campanato_L_constant_and_bmo_link(self, rng):
        spec = GridSpec(2, 1.0, 32, 12)
        K = heat_kernel_family(2)
        balls = family(spec, spec.h, 1.5, 2)
        c = sample(lambda x, y: np.full_like(x, -1.25), spec)
        assert campanato_L_norm(c, 2.0, -0.5, balls, K).value == 0.0
        assert bmo_L_norm(c, K, balls) == 0.0
        f = random_function(spec, rng)
        est = campanato_L_norm(f, 1.0, 0.0, balls, K)
        assert est.value == pytest.approx(adapted_means(f, balls, 1.0, K).max(), rel=1e-14)

    def test_campanato_L_inadmissible_radius(self):
        spec = GridSpec(2, 1.0, 32, 4)
        f = sample(lambda x, y: x * y, spec)
        with pytest.raises(MarginError, match="radius"):
            campanato_L_norm(f, 2.0, -0.5, family(spec, 2 * spec.h, 2.0, 2), heat_kernel_family(2))

    def test_sharp_maximal_dominates_each_ball(self, rng):
        spec = GridSpec(2, 1.0, 32, 12)
        K = heat_kernel_family(2)
        f = random_function(spec, rng)
        balls = family(spec, spec.h, 1.5, 2, 2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            field = sharp_maximal_L(f, K, balls)
        means = adapted_means(f, balls, 1.0, K)
        for b, m in zip(balls[::7], means[::7]):
            for idx in map(tuple, ball_points(spec, b)):
                assert field.field.values[idx] >= m

    def test_sharp_maximal_warns_uncovered(self):
        spec = GridSpec(1, 1.0, 32, 12)
        f = sample(lambda x: x * x, spec)
        with pytest.warns(UserWarning, match="lie in no family ball"):
            out = sharp_maximal_L(f, heat_kernel_family(1), [Ball((16,), spec.h)])
        assert out.uncovered == 8
        assert out.field.values[13] == 0.0


class TestLip:
    def test_affine(self):
        spec = GridSpec(2, 1.0, 32, 4)
        f = sample(lambda x, y: 2.5 * x, spec)
        assert lip_norm(f, 1.0) == pytest.approx(2.5, rel=1e-12)
        assert lip_norm(sample(lambda x, y: np.full_like(x, 3.0), spec), 1.0) == 0.0

    def test_sqrt_abs(self):
        spec = GridSpec(1, 1.0, 64, 0)
        f = sample(lambda x: np.sqrt(np.abs(x)), spec)
        est = lip_estimate(f, 0.5)
        # pairwise brute force, |sqrt|x| - sqrt|y|| / |x - y|^{1/2} peaks at 1 on pairs across 0
        xs = spec.coords()[0]
        brute = max(
            abs(math.sqrt(abs(a)) - math.sqrt(abs(b))) / abs(a - b) ** 0.5
            for i, a in enumerate(xs) for b in xs[i + 1:]
        )
        assert est.value == pytest.approx(brute, rel=1e-12)
        assert 0.95 < est.value <= 1.0 + 1e-12
        (i,), (j,) = est.pair
        assert (xs[i] <= 0 <= xs[j]) or (xs[j] <= 0 <= xs[i])

    def test_stride_sampling(self):
        spec = GridSpec(2, 1.0, 128, 0)
        f = sample(lambda x, y: x - 2 * y, spec)
        est = lip_estimate(f, 1.0, min_pairs=10_000)
        assert est.stride > 1 and est.pairs >= 10_000
        assert est.value <= math.sqrt(5) * (1 + 1e-12)

    def test_rejects_beta(self, spec1):
        with pytest.raises(ExponentError):
            lip_norm(sample(lambda x: x, spec1), 1.5)


class TestTypeAndRH:
    def test_type_zero(self, spec1):
        assert type_norm(sample(lambda x: 0 * x, spec1), 2.0, 0.5) == 0.0

    def test_type_one_dim1(self):
        rho, p = 0.5, 2.0
        vals = []
        for L in (4.0, 64.0, 1024.0):
            spec = GridSpec(1, L, 2**16)
            f = sample(lambda x: np.ones_like(x), spec)
            vals.append(type_norm(f, p, rho))
        assert vals[0] < vals[1] < vals[2]
        L = 1024.0
        box = float(mpmath.quad(lambda x: (1 + abs(x)) ** (-1 - rho), [-L, 0, L]))
        assert vals[-1] == pytest.approx(box ** (1 / p), rel=1e-3)
        assert box + type_tail_weight(1, L, rho) == pytest.approx(2 / rho, rel=1e-12)
        limit = (2 / rho) ** (1 / p)
        assert (limit - vals[-1]) / limit < 0.1

    def test_type_tail_weight_dim2(self):
        L, rho = 3.0, 0.7
        ref = float(mpmath.quad(lambda r: 2 * mpmath.pi * r * (1 + r) ** (-2 - rho), [L, mpmath.inf]))
        assert type_tail_weight(2, L, rho) == pytest.approx(ref, rel=1e-12)

    def test_rh_affine(self):
        spec = GridSpec(1, 1.0, 128, 8)
        b = sample(lambda x: 3 * x, spec)
        balls = family(spec, 4 * spec.h, 2.0, 3, 4)
        ratio = rh_infty_ratio(b, balls)
        assert abs(ratio / 2 - 1) < 0.1
        assert rh_infty_ratio(b + 5.0, balls) == pytest.approx(ratio, rel=1e-12)

    def test_rh_constant_rejected(self, spec1):
        with pytest.raises(GridError, match="constant"):
            rh_infty_ratio(sample(lambda x: np.full_like(x, 2.0), spec1), family(spec1))


# arrays are drawn through a seed so that shrinking stays cheap
arrays32 = st.builds(
    lambda seed, scale: scale * np.random.default_rng(seed).standard_normal((32, 32)),
    st.integers(0, 2**32 - 1),
    st.floats(1e-2, 1e2),
)


class TestProperties:
    spec = GridSpec(2, 1.0, 32, 12)
    balls = family(GridSpec(2, 1.0, 32, 12), GridSpec(2, 1.0, 32, 12).h, 1.5, 2, 2)
    K = heat_kernel_family(2)

    def seminorms(self, f):
        return (
            campanato_norm(f, 2.0, 0.5, self.balls).value,
            campanato_norm(f, 1.5, -0.5, self.balls).value,
            bmo_norm(f, self.balls).value,
            campanato_L_norm(f, 2.0, -0.5, self.balls, self.K).value,
        )

    @settings(max_examples=15)
    @given(arrays32, arrays32, st.floats(-5, 5), st.floats(-3, 3))
    def test_seminorm_axioms(self, a, b, lam, c):
        f, g = GridFunction(self.spec, a), GridFunction(self.spec, b)
        nf, ng, nfg = self.seminorms(f), self.seminorms(g), self.seminorms(f + g)
        for x, y, z in zip(nf, ng, nfg):
            assert z <= x + y + 1e-10 * (1 + x + y)
        for x, y in zip(nf, self.seminorms(lam * f)):
            assert y == pytest.approx(abs(lam) * x, rel=1e-10, abs=1e-10)
        for x, y in zip(nf, self.seminorms(f + c)):
            assert y == pytest.approx(x, rel=1e-10, abs=1e-9)

    @settings(max_examples=15)
    @given(arrays32, st.integers(1, 8))
    def test_family_monotone(self, a, cut):
        f = GridFunction(self.spec, a)
        sub = self.balls[: cut * len(self.balls) // 8]
        for fn in (
            lambda B: morrey_norm(f, 2.0, -0.5, B).value,
            lambda B: campanato_norm(f, 2.0, 0.5, B).value,
            lambda B: bmo_norm(f, B).value,
            lambda B: campanato_L_norm(f, 2.0, -0.5, B, self.K).value,
        ):
            assert fn(sub) <= fn(self.balls)

    @settings(max_examples=15)
    @given(arrays32)
    def test_inclusion_chain(self, a):
        f = GridFunction(self.spec, a)
        for beta in (-0.25, -0.75):
            assert campanato_norm(f, 2.0, beta, self.balls).value <= (
                2 * morrey_norm(f, 2.0, beta, self.balls).value * (1 + 1e-12)
            )

    @settings(max_examples=15)
    @given(arrays32, st.floats(1e-3, 1e3))
    def test_argmax_scale_invariant(self, a, lam):
        f = GridFunction(self.spec, a)
        for fn in (
            lambda g: morrey_norm(g, 2.0, -0.5, self.balls),
            lambda g: campanato_norm(g, 1.0, 0.25, self.balls),
            lambda g: bmo_norm(g, self.balls),
            lambda g: campanato_L_norm(g, 2.0, -0.5, self.balls, self.K),
        ):
            est, scaled = fn(f), fn(lam * f)
            assert est.argmax_ball == scaled.argmax_ball

    def test_value_matches_argmax_reevaluation(self, rng):
        f = random_function(self.spec, rng)
        est = campanato_norm(f, 2.0, 0.5, self.balls)
        again = campanato_norm(f, 2.0, 0.5, [est.argmax_ball])
        assert again.value == est.value

    def test_snapshots_shared(self, rng):
        f = random_function(self.spec, rng)
        snaps = semigroup_snapshots(f, [b.radius for b in self.balls], self.K)
        assert len(snaps) == 2
        a = campanato_L_norm(f, 2.0, -0.5, self.balls, self.K, snapshots=snaps)
        b = campanato_L_norm(f, 2.0, -0.5, self.balls, self.K)
        assert a.value == b.value

    def test_json_schema(self, rng):
        f = random_function(self.spec, rng)
        d = morrey_norm(f, 2.0, -0.5, self.balls, {"r_min": 1}).to_dict()
        assert set(d) == {"norm", "p", "exponent", "value", "argmax_center", "argmax_radius", "N", "ladder"}
