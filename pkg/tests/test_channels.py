"""Tests for channel models, symmetrization, info measures, Lloyd-Max."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netbricks import channels as ch


class TestSymmetrize:
    def test_degenerate_y_is_bsc_theta(self):
        # a Bern(theta) source with an information-free observation
        # symmetrizes to BSC(theta)
        theta = 0.3
        j = ch.JointSource.degenerate(theta)
        sym = ch.symmetrize(j)
        want = ch.Dmc.bsc(theta)
        # outputs (y=0, v) for v in {0,1}
        assert np.allclose(sym.p, want.p)

    def test_capacity_identity_bsc(self):
        # X ~ Bern(1/2) through BSC(q): MI of the symmetrized channel under
        # uniform input equals 1 - H(q)
        q = 0.11
        j = ch.JointSource.from_factored(0.5, ch.Dmc.bsc(q))
        sym = ch.symmetrize(j)
        mi = ch.mutual_info([0.5, 0.5], sym)
        assert abs(mi - (1 - ch.hb(q))) < 1e-9

    def test_involution_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            pxy = rng.random((2, 3))
            pxy /= pxy.sum()
            sym = ch.symmetrize(ch.JointSource(pxy))
            # pbar(y,v|x) == pbar(y,v^1|x^1) for every entry
            for y in range(3):
                for v in (0, 1):
                    assert sym.p[0, 2 * y + v] == pytest.approx(
                        sym.p[1, 2 * y + (v ^ 1)], abs=0)

    def test_capacity_equals_one_minus_cond_entropy(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            pxy = rng.random((2, 4))
            pxy /= pxy.sum()
            j = ch.JointSource(pxy)
            sym = ch.symmetrize(j)
            assert abs(ch.mutual_info([0.5, 0.5], sym) - (1 - j.cond_entropy())) < 1e-9

    def test_bms_involution_found(self):
        sym = ch.symmetrize(ch.JointSource.from_factored(0.3, ch.Dmc.bsc(0.2)))
        pi = sym.bms_involution()
        assert pi is not None
        for y in range(sym.n_outputs):
            assert sym.p[0, y] == pytest.approx(sym.p[1, pi[y]])
            assert pi[pi[y]] == y


class TestInfoMeasures:
    def test_noiseless_bsc(self):
        assert ch.mutual_info([0.5, 0.5], ch.Dmc.bsc(0.0)) == pytest.approx(1.0)

    def test_bsc_closed_form(self):
        p = 0.11
        assert ch.mutual_info([0.5, 0.5], ch.Dmc.bsc(p)) == pytest.approx(
            1 - ch.hb(p), abs=1e-12)

    def test_cond_entropy_table(self):
        j = ch.JointSource.from_factored(0.5, ch.Dmc.bsc(0.11))
        assert j.cond_entropy() == pytest.approx(ch.hb(0.11), abs=1e-12)

    def test_biawgn_capacity_matches_quadrature(self):
        # two independent discretizations agree
        bi = ch.BiAwgn(2.0)
        mix = bi.as_mixture()
        j = mix.discretize()
        assert abs((1 - j.cond_entropy()) - bi.capacity()) < 1e-9


class TestSampling:
    def test_bsc_zero_is_deterministic(self):
        rng = np.random.default_rng(2)
        out = ch.Dmc.bsc(0.0).sample(np.ones(100, dtype=np.uint8), rng)
        assert (out == 1).all()

    def test_biawgn_noiseless_limit_llr_sign(self):
        bi = ch.BiAwgn(400.0)
        rng = np.random.default_rng(3)
        x = np.array([0, 1, 0, 1], dtype=np.uint8)
        y = bi.sample(x, rng)
        llr = bi.llr(y)
        assert ((llr > 0) == (x == 0)).all()
        assert np.abs(llr).max() <= ch.LLR_CLAMP

    def test_bsc_empirical_flip_rate(self):
        rng = np.random.default_rng(4)
        n = 10**6
        out = ch.Dmc.bsc(0.1).sample(np.zeros(n, dtype=np.uint8), rng)
        rate = out.mean()
        sigma = np.sqrt(0.1 * 0.9 / n)
        assert abs(rate - 0.1) < 4 * sigma

    def test_joint_source_sampling(self):
        rng = np.random.default_rng(5)
        j = ch.JointSource.from_factored(0.3, ch.Dmc.bsc(0.2))
        x, y = j.sample(200000, rng)
        assert abs(x.mean() - 0.3) < 0.01
        flips = (y != x).mean()
        assert abs(flips - 0.2) < 0.01


class TestGaussianMixture:
    def test_sym_llr_sign_flip(self):
        mix = ch.BiAwgn(1.0).as_mixture()
        y = np.array([0.7, -0.3])
        l0 = mix.sym_llr(y, np.zeros(2, dtype=np.uint8))
        l1 = mix.sym_llr(y, np.ones(2, dtype=np.uint8))
        assert np.allclose(l0, -l1)

    def test_state_channel_g_zero_is_stateless(self):
        sc = ch.StateChannel(power=1.0, g=0.0, theta=0.1)
        mix = sc.mixture_given_x([0.5, 0.5])
        ys = np.linspace(-5, 5, 101)
        # with g=0 the conditional law p(y|x) collapses to a single Gaussian
        ref0 = np.exp(-0.5 * (ys - 1.0) ** 2) / np.sqrt(2 * np.pi)
        assert np.allclose(mix.density(0, ys), ref0, atol=1e-12)

    def test_state_channel_joint_xs(self):
        sc = ch.StateChannel(power=1.0, g=0.9, theta=0.1)
        j = sc.joint_xs([0.2, 0.8])
        assert j.pxy.sum() == pytest.approx(1.0)
        assert j.pxy[1, 0] == pytest.approx(0.9 * 0.2)
        assert j.pxy[1, 1] == pytest.approx(0.1 * 0.8)

    def test_bhattacharyya_bsc_consistency(self):
        # symmetrized BSC joint: z = 2*sqrt(p(0,y)p(1,y)) summed
        q = 0.11
        j = ch.JointSource.from_factored(0.5, ch.Dmc.bsc(q))
        sym = ch.symmetrize(j)
        assert sym.bhattacharyya() == pytest.approx(2 * np.sqrt(q * (1 - q)), abs=1e-12)


class TestVectorChannel:
    def test_power_diagonal(self):
        v = ch.VectorChannel2x2(np.eye(2), np.diag([2.0, 3.0]))
        assert v.avg_power() == pytest.approx(13.0)

    def test_decoupled_mixture(self):
        # identity channel, diagonal precoder: user 0 sees clean BPSK
        v = ch.VectorChannel2x2(np.eye(2), np.diag([1.5, 1.0]))
        mix = v.user_mixture(0, p_other1=0.5)
        assert np.allclose(sorted(mix.means[0]), [1.5, 1.5])

    def test_sample_shape(self):
        v = ch.VectorChannel2x2([[1, 0.9], [0.9, 1]], np.eye(2))
        rng = np.random.default_rng(6)
        y = v.sample(np.zeros((50, 2), dtype=np.uint8), rng)
        assert y.shape == (50, 2)


class TestLloydMax:
    def test_unit_gaussian_two_levels(self):
        ys, w = ch.gaussian_grid([0.0], [1.0], points=20001)
        q = ch.lloyd_max(ys, w, 2)
        # grid-resolution accuracy: the fixed point of the discretized
        # problem is symmetric only to within the grid spacing
        assert abs(q.boundaries[0]) < 1e-3
        assert np.allclose(np.abs(q.levels), np.sqrt(2 / np.pi), atol=1e-3)

    def test_symmetric_density_symmetric_quantizer(self):
        ys, w = ch.gaussian_grid([-2.0, 2.0], [0.5, 0.5])
        q = ch.lloyd_max(ys, w, 4)
        assert np.allclose(q.levels, -q.levels[::-1], atol=2e-2)

    def test_tight_clusters(self):
        ys = np.linspace(-2, 2, 4001)
        w = np.exp(-0.5 * ((ys - 1) / 0.01) ** 2) + np.exp(-0.5 * ((ys + 1) / 0.01) ** 2)
        q = ch.lloyd_max(ys, w, 2)
        assert np.allclose(sorted(q.levels), [-1, 1], atol=1e-3)

    def test_distortion_monotone(self):
        # monotonicity is enforced inside lloyd_max; convergence implies it held
        ys, w = ch.gaussian_grid([0.0], [1.0])
        q = ch.lloyd_max(ys, w, 3)
        assert q.levels.size == 3


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_symmetrize_involution_property(seed):
    rng = np.random.default_rng(seed)
    L = int(rng.integers(1, 5))
    pxy = rng.random((2, L)) + 1e-3
    pxy /= pxy.sum()
    sym = ch.symmetrize(ch.JointSource(pxy))
    for y in range(L):
        for v in (0, 1):
            assert sym.p[0, 2 * y + v] == sym.p[1, 2 * y + (v ^ 1)]
