"""Tests for the polar point-to-point bricks.

The SC decoder is checked against an independent probability-domain
implementation, the transform against an explicit Kronecker-power matrix,
and the Monte-Carlo estimators against closed-form or trivial cases.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom

from netbricks import gf2core as g2
from netbricks import polarbrick as pb
from netbricks.channels import BiAwgn, Dmc, hb


def kron_transform(m):
    f = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    t = np.array([[1]], dtype=np.uint8)
    for _ in range(m):
        t = np.kron(t, f)
    return t


def sc_prob_oracle(p0, p1, frozen_mask, base=0):
    """Probability-domain SC decode; returns (u bits, codeword bits)."""
    n = len(p0)
    if n == 1:
        if frozen_mask[base]:
            u = 0
        else:
            # hard decision with tie -> 0, matching the LLR-domain rule
            u = 0 if p0[0] >= p1[0] else 1
        return [u], [u]
    h = n // 2
    p0a, p1a = p0[:h], p1[:h]
    p0b, p1b = p0[h:], p1[h:]
    q0 = p0a * p0b + p1a * p1b
    q1 = p0a * p1b + p1a * p0b
    u_l, x_l = sc_prob_oracle(q0, q1, frozen_mask, base)
    s = np.array(x_l)
    r0 = np.where(s == 0, p0a, p1a) * p0b
    r1 = np.where(s == 0, p1a, p0a) * p1b
    u_r, x_r = sc_prob_oracle(r0, r1, frozen_mask, base + h)
    return u_l + u_r, list(s ^ np.array(x_r)) + x_r


# ---------------------------------------------------------------------------
# transform and construction

def test_transform_matches_kronecker_power():
    rng = np.random.default_rng(0)
    for m in range(1, 5):
        n = 1 << m
        t = kron_transform(m)
        us = rng.integers(0, 2, size=(10, n), dtype=np.uint8)
        assert np.array_equal(pb.polar_transform(us), (us @ t) % 2)


def test_transform_is_involutive():
    rng = np.random.default_rng(1)
    us = rng.integers(0, 2, size=(20, 64), dtype=np.uint8)
    assert np.array_equal(pb.polar_transform(pb.polar_transform(us)), us)


def test_bhattacharyya_plus_better_than_minus():
    # z^2 < 2z - z^2 for all z in (0,1)
    for p in (0.01, 0.1, 0.3, 0.49):
        z = Dmc.bsc(p).bhattacharyya()
        zs = pb.bhattacharyya_bounds(z, 2)
        assert zs[1] < zs[0]
        assert zs[1] == pytest.approx(z * z)
        assert zs[0] == pytest.approx(2 * z - z * z)


def test_noiseless_channel_gives_zero_bounds():
    zs = pb.bhattacharyya_bounds(Dmc.bsc(0.0).bhattacharyya(), 16)
    assert np.all(zs == 0.0)


def test_construct_is_deterministic():
    a = pb.construct(Dmc.bsc(0.11), 300, 1024)
    b = pb.construct(Dmc.bsc(0.11), 300, 1024)
    assert np.array_equal(a.info_set, b.info_set)
    assert a.k == 300 and a.n == 1024


def test_bound_recursion_ordering_matches_exact_bsc_n2():
    # for n=2 on a BSC the exact synthetic Bhattacharyya parameters are
    # computable by hand; the bound ordering must agree
    p = 0.2
    z = 2 * np.sqrt(p * (1 - p))
    zs = pb.bhattacharyya_bounds(z, 2)
    # exact: Z(W+) = z^2; Z(W-) <= 2z - z^2 (bound is not tight but ordering is)
    assert zs[1] == pytest.approx(z**2)
    assert zs[0] >= zs[1]


# ---------------------------------------------------------------------------
# parity check

def test_parity_check_nullspace_is_codebook_n4():
    brick = pb.construct(Dmc.bsc(0.1), 2, 4)
    pc = pb.parity_check(brick)
    h_raw = np.zeros((2, 4), dtype=int)
    h_raw[:, brick._pc.col_perm] = pc.h.to_array()  # undo permutation
    # enumerate SC-encodable words
    msgs = np.array([[a, b] for a in (0, 1) for b in (0, 1)], dtype=np.uint8)
    cws = {tuple(c) for c in brick.encode_batch(msgs)}
    null = {
        tuple(x)
        for x in (np.array([[int(c) for c in f"{i:04b}"] for i in range(16)]))
        if not ((x @ h_raw.T) % 2).any()
    }
    assert cws == null


def test_parity_check_single_row_when_k_is_n_minus_1():
    brick = pb.construct(Dmc.bsc(0.1), 7, 8)
    pc = pb.parity_check(brick)
    assert pc.h.rows == 1
    # the worst synthetic channel is u_0; its transform column is all-ones,
    # so the single check is overall parity
    assert pc.h.to_array().sum() == 8


def test_parity_check_full_rank_larger():
    brick = pb.construct(BiAwgn(1.0), 100, 256)
    pc = pb.parity_check(brick)
    assert g2.rank(pc.h) == 156


# ---------------------------------------------------------------------------
# SC decoding

def test_sc_decode_matches_probability_domain_oracle():
    rng = np.random.default_rng(7)
    for n, k in ((8, 4), (16, 9), (32, 20)):
        brick = pb.construct(Dmc.bsc(0.08), k, n)
        frozen = ~brick.info_mask
        llrs = rng.normal(0, 3, size=(40, n))
        dec = pb.sc_decode_batch(brick, llrs)
        for t in range(40):
            # convert LLRs to a probability pair per position
            p1 = 1.0 / (1.0 + np.exp(llrs[t]))
            p0 = 1.0 - p1
            _, x = sc_prob_oracle(p0, p1, frozen)
            assert np.array_equal(dec[t], np.array(x, dtype=np.uint8))


def test_sc_decode_noiseless_recovers_codeword():
    rng = np.random.default_rng(3)
    brick = pb.construct(Dmc.bsc(0.05), 40, 128)
    msgs = rng.integers(0, 2, size=(30, 40), dtype=np.uint8)
    cw = brick.encode_batch(msgs)
    llrs = (1.0 - 2.0 * cw) * 12.0
    assert np.array_equal(pb.sc_decode_batch(brick, llrs), cw)


def test_sc_decode_all_zero_llrs_hits_tie_rule():
    brick = pb.construct(Dmc.bsc(0.1), 5, 16)
    out = pb.sc_decode_batch(brick, np.zeros(16))
    assert not out.any()  # every tie resolves to 0, all-zero codeword


def test_sc_decode_output_is_always_a_codeword():
    rng = np.random.default_rng(11)
    brick = pb.construct(Dmc.bsc(0.2), 20, 64)
    pc = pb.parity_check(brick)
    dec = pb.sc_decode_batch(brick, rng.normal(0, 2, size=(50, 64)))
    assert not pc.syndrome_batch(dec).any()


def test_sc_decode_bler_bsc():
    # moderate-rate code on a mildly noisy BSC decodes most blocks
    rng = np.random.default_rng(5)
    brick = pb.construct(Dmc.bsc(0.05), 128, 256)
    eps, (lo, hi) = pb.estimate_error_prob(brick, Dmc.bsc(0.05), 10_000, rng)
    assert hi < 0.1


def test_sc_decode_bler_biawgn():
    rng = np.random.default_rng(6)
    power = 10 ** 0.4  # 4 dB with unit noise variance
    ch = BiAwgn(power)
    brick = pb.construct(ch, 512, 1024)
    eps, (lo, hi) = pb.estimate_error_prob(brick, ch, 2000, rng)
    assert hi <= 0.1


# ---------------------------------------------------------------------------
# shaping mode

def test_sc_shape_with_saturated_llrs_equals_hard_decode():
    # degenerate posteriors (codeword-consistent saturated LLRs) make the
    # sampler deterministic and equal to the hard decoder
    rng = np.random.default_rng(9)
    brick = pb.construct(Dmc.bsc(0.1), 30, 64)
    cw = brick.encode_batch(rng.integers(0, 2, size=(25, 30), dtype=np.uint8))
    llrs = (1.0 - 2.0 * cw) * 60.0
    sd = pb.sc_decode_batch(brick, llrs)
    ss = pb.sc_shape_batch(brick, llrs, np.random.default_rng(1))
    assert np.array_equal(sd, ss)
    assert np.array_equal(sd, cw)


def test_sc_shape_bsc_distortion():
    # shaping a uniform source at rate 1 - H(D) + 1/16 lands near D
    rng = np.random.default_rng(13)
    n, d = 1024, 0.11
    k = int(np.ceil(n * (1 - hb(d) + 1.0 / 16)))
    ch = Dmc.bsc(d)
    brick = pb.construct(ch, k, n, mode="shaping")
    v = rng.integers(0, 2, size=(400, n), dtype=np.uint8)
    llr0 = float(ch.llr(np.array([0]))[0])
    dec = pb.sc_shape_batch(brick, np.where(v == 0, llr0, -llr0), rng)
    mean_dist = (v ^ dec).sum(axis=1).mean() / n
    assert abs(mean_dist - d) < 0.02


def test_sc_shape_batch_matches_single():
    rng = np.random.default_rng(21)
    brick = pb.construct(Dmc.bsc(0.2), 12, 32)
    llrs = rng.normal(0, 1, size=32)
    a = pb.sc_shape_batch(brick, llrs, np.random.default_rng(4))
    b = pb.sc_shape_batch(brick, llrs[None, :], np.random.default_rng(4))
    assert np.array_equal(a, b[0])


# ---------------------------------------------------------------------------
# nesting

def test_nested_inner_codebook_contained_n16():
    pair = pb.nested(Dmc.bsc(0.05), Dmc.bsc(0.2), 9, 4, 16)
    inner_msgs = np.array(
        [[(i >> j) & 1 for j in range(4)] for i in range(16)], dtype=np.uint8
    )
    inner_cws = pair.inner.encode_batch(inner_msgs)
    outer_msgs = np.array(
        [[(i >> j) & 1 for j in range(9)] for i in range(512)], dtype=np.uint8
    )
    outer_set = {tuple(c) for c in pair.outer.encode_batch(outer_msgs)}
    assert all(tuple(c) in outer_set for c in inner_cws)
    # inner info set is a subset of the outer one
    assert set(pair.inner.info_set) <= set(pair.outer.info_set)


def test_nested_q_freezes_inner_codewords():
    rng = np.random.default_rng(15)
    pair = pb.nested(Dmc.bsc(0.05), Dmc.bsc(0.3), 20, 8, 64)
    msgs = rng.integers(0, 2, size=(40, 8), dtype=np.uint8)
    cw = pair.inner.encode_batch(msgs)
    # inner codewords satisfy both the outer parity check and Q
    assert not pb.parity_check(pair.outer).syndrome_batch(cw).any()
    assert not g2.mat_vec_batch(pair.q, cw).any()
    # coset message extraction agrees with explicit Q multiplication
    out_cw = pair.outer.encode_batch(rng.integers(0, 2, (40, 20), dtype=np.uint8))
    assert np.array_equal(
        pair.coset_message_batch(out_cw), g2.mat_vec_batch(pair.q, out_cw)
    )


def test_nested_stack_is_inner_parity_check():
    pair = pb.nested(Dmc.bsc(0.05), Dmc.bsc(0.3), 10, 3, 32)
    h2 = g2.stack(pb.parity_check(pair.outer).h, pair.q)
    # h from parity_check is permuted; rebuild the raw outer H instead
    t = pb.polar_transform(np.eye(32, dtype=np.uint8))
    frozen = np.nonzero(~pair.outer.info_mask)[0]
    h1_raw = g2.BitMatrix.from_array(np.ascontiguousarray(t[:, frozen].T))
    h2 = g2.stack(h1_raw, pair.q)
    assert g2.rank(h2) == 29
    msgs = np.array(
        [[(i >> j) & 1 for j in range(3)] for i in range(8)], dtype=np.uint8
    )
    cw = pair.inner.encode_batch(msgs)
    assert not g2.mat_vec_batch(h2, cw).any()


def test_nested_k2_zero_and_one_row_edges():
    pair = pb.nested(Dmc.bsc(0.1), Dmc.bsc(0.1), 5, 0, 16)
    assert pair.inner.k == 0
    assert pair.q.rows == 5
    pair = pb.nested(Dmc.bsc(0.1), Dmc.bsc(0.1), 5, 4, 16)
    assert pair.q.rows == 1
    with pytest.raises(pb.InfeasibleNesting):
        pb.nested(Dmc.bsc(0.1), Dmc.bsc(0.1), 4, 4, 16)


# ---------------------------------------------------------------------------
# estimators

def test_estimate_error_prob_noiseless_is_zero():
    rng = np.random.default_rng(2)
    brick = pb.construct(Dmc.bsc(0.1), 8, 16)
    eps, (lo, hi) = pb.estimate_error_prob(brick, Dmc.bsc(0.0), 500, rng)
    assert eps == 0.0 and lo == 0.0


def test_estimate_error_prob_monotone_in_crossover():
    brick = pb.construct(Dmc.bsc(0.08), 128, 256)
    results = []
    for i, p in enumerate((0.02, 0.08, 0.2)):
        rng = np.random.default_rng(100 + i)
        results.append(pb.estimate_error_prob(brick, Dmc.bsc(p), 3000, rng))
    # CI-separated increase across the grid
    assert results[0][1][1] < results[1][1][0]
    assert results[1][1][1] < results[2][1][0]


def test_w_spectrum_identity_decoder_point_mass():
    # a rate-1 brick (no frozen bits) reproduces its input exactly
    brick = pb.PolarBrick(8, range(8), ch=Dmc.bsc(0.1), mode="hard")
    counts = pb.estimate_w_spectrum(brick, 200, np.random.default_rng(0))
    assert counts[0] == 200 and counts[1:].sum() == 0


def test_w_spectrum_tv_to_binomial_improves_with_n():
    # shaping brick at rate 1 - H(alpha) + 1/16: the Hamming-distance
    # spectrum approaches Binom(n, alpha) as n grows
    alpha = 0.25
    tvs = []
    for i, n in enumerate((256, 4096)):
        rng = np.random.default_rng(40 + i)
        k = int(np.ceil(n * (1 - hb(alpha) + 1.0 / 16)))
        brick = pb.construct(Dmc.bsc(alpha), k, n, mode="shaping")
        counts = pb.estimate_w_spectrum(brick, 20_000, rng)
        emp = counts / counts.sum()
        ref = binom.pmf(np.arange(n + 1), n, alpha)
        tvs.append(0.5 * np.abs(emp - ref).sum())
    # the improvement with block length is slow (the rate margin is fixed at
    # 1/16) so the scales are spread a factor 16 apart to beat the Monte
    # Carlo noise floor of the plug-in TV estimate
    assert tvs[1] < tvs[0] - 0.02


def test_t_spectrum_shapes_and_totals():
    rng = np.random.default_rng(17)
    ch = Dmc.bsc(0.1)
    brick = pb.construct(ch, 20, 32, mode="shaping")
    types = pb.estimate_t_spectrum(brick, ch, 50, rng)
    assert types.shape == (50, 2, 2)
    assert (types.sum(axis=(1, 2)) == 32).all()
    assert (types >= 0).all()


def test_wilson_interval_known_values():
    lo, hi = pb.wilson_interval(0, 100)
    assert lo == 0.0 and 0.03 < hi < 0.05
    lo, hi = pb.wilson_interval(50, 100)
    assert abs((lo + hi) / 2 - 0.5) < 1e-9
    lo, hi = pb.wilson_interval(100, 100)
    assert hi > 0.9999 and 0.95 < lo < 0.97


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**31 - 1))
def test_decode_always_codeword_property(m, seed):
    n = 1 << m
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, n))
    brick = pb.construct(Dmc.bsc(0.15), k, n) if k < n else pb.PolarBrick(n, range(n))
    llrs = rng.normal(0, 2, size=(4, n))
    dec = pb.sc_decode_batch(brick, llrs)
    shp = pb.sc_shape_batch(brick, llrs, rng)
    if k < n:
        pc = pb.parity_check(brick)
        assert not pc.syndrome_batch(dec).any()
        assert not pc.syndrome_batch(shp).any()
    # u-domain consistency: frozen coordinates of the inverse transform are 0
    assert not pb.polar_transform(dec)[:, ~brick.info_mask].any()
    assert not pb.polar_transform(shp)[:, ~brick.info_mask].any()
