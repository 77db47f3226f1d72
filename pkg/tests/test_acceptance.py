"""Acceptance suite: one test per top-level acceptance criterion.

Each test exercises a full pipeline at its stated operating point and
tolerance; together they cover the exact coset identities, the
point-to-point error equalities, lossy shaping accuracy, rate-distortion
convergence, the state-channel coding gain, block-Markov spectra, the
multi-user orderings, and the bit-exact scheme reductions.
"""

import numpy as np
import pytest

from netbricks import blockmarkov as bm
from netbricks import bricks as bk
from netbricks import gf2core as g2
from netbricks import harness as hz
from netbricks import optim
from netbricks import polarbrick as pb
from netbricks import schemes as sch
from netbricks.channels import (Dmc, JointSource, StateChannel, hb,
                                symmetrize)
from netbricks.schemes import DitherStream, _dims


def _random_full_rank(rng, r, n):
    while True:
        m = g2.BitMatrix.from_array(
            rng.integers(0, 2, size=(r, n), dtype=np.uint8))
        if g2.rank(m) == r:
            return m


def _pack(rows):
    pow2 = (1 << np.arange(rows.shape[1] - 1, -1, -1)).astype(np.int64)
    return rows.astype(np.int64) @ pow2


# ---------------------------------------------------------------------------
# criterion 1: exact coset identities on >= 20 random codes, n <= 10

def test_exact_coset_identities_on_random_codes():
    rng = np.random.default_rng(42)
    for trial in range(20):
        n = int(rng.integers(3, 11))
        r = int(rng.integers(1, n))
        pc = g2.normalize(_random_full_rank(rng, r, n))
        k = pc.k
        xs = bk.all_bit_rows(n)
        ts = pc.syndrome_batch(xs)
        sh = pc.shift_orig_batch(xs)
        # (i) uniqueness: per syndrome, exactly one vector vanishes on the
        # information coordinates, and the computed shift equals it
        t_ids = _pack(ts)
        zero_info = ~xs[:, pc.info_cols].any(axis=1)
        for t in range(1 << r):
            members = np.flatnonzero((t_ids == t) & zero_info)
            assert members.size == 1
            same_coset = np.flatnonzero(t_ids == t)
            assert (_pack(sh[same_coset]) == _pack(xs[members])[0]).all()
        # (ii) exhaustive dithers map exactly 2^(n-k)-to-1 onto the code
        cws = np.array([
            g2.uniform_codeword(pc, g2.BitVector.from_array(x)).to_array()
            for x in xs])
        _, counts = np.unique(_pack(cws), return_counts=True)
        assert counts.size == 1 << k
        assert (counts == 1 << (n - k)).all()
        # (iii) codebook + coset leaders tile the whole space uniformly
        leaders = pc.shift_from_syndrome_batch(
            bk.all_bit_rows(r) if r else np.zeros((1, 0), dtype=np.uint8))
        codebook = pc.encode_orig_batch(
            bk.all_bit_rows(k) if k else np.zeros((1, 0), dtype=np.uint8))
        tiles = _pack((codebook[:, None, :] ^ leaders[None, :, :])
                      .reshape(-1, n))
        assert np.array_equal(np.sort(tiles), np.arange(1 << n))
    # exact joint product law on small coset codes
    cases = [((1, 2), JointSource.from_factored(0.5, Dmc.bsc(0.1))),
             ((2, 4), JointSource.from_factored(0.3, Dmc.bsc(0.15))),
             ((2, 5), JointSource.from_factored(0.5, Dmc.bsc(0.25))),
             ((3, 6), JointSource.degenerate(0.2))]
    for (r, n), joint in cases:
        pc = g2.normalize(_random_full_rank(rng, r, n))
        assert bk.check_lemma2_exact(pc, joint) <= 1e-12
    # shaping-chain laws stay within the exact shaping distance
    for theta, q in ((0.5, 0.2), (0.3, 0.1)):
        joint = JointSource.from_factored(theta, Dmc.bsc(q))
        sym = symmetrize(joint)
        for mode in ("hard", "shaping"):
            b = bk.BrickP2P.from_polar(pb.construct(sym, 2, 4, mode=mode))
            delta = bk.exact_shaping_distance(b, sym)
            assert _uy_law_tv(b, joint) <= delta + 1e-9


def _uy_law_tv(brick_p2p, joint):
    n = brick_p2p.n
    sym = symmetrize(joint)
    ys = bk.all_label_rows(2, n)
    vs = bk.all_bit_rows(n)
    py = joint.py()
    llr_table = sym.llr(np.arange(4))
    pow2 = (1 << np.arange(n - 1, -1, -1)).astype(np.int64)
    law = np.zeros((1 << n, 1 << n))
    cb = brick_p2p.codebook()
    for y in ys:
        p_y = np.prod(py[y], axis=0)
        obs = 2 * np.tile(y, (vs.shape[0], 1)) + vs
        dists = brick_p2p.decode_dists(llr_table[obs])
        for vi in range(vs.shape[0]):
            u = cb ^ vs[vi]
            np.add.at(law, (u @ pow2, np.full(len(cb), y @ pow2)),
                      p_y * 2.0 ** -n * dists[vi])
    target = np.zeros_like(law)
    for x in bk.all_bit_rows(n):
        target[x @ pow2] = [np.prod(joint.pxy[x, y], axis=0) for y in ys]
    return 0.5 * np.abs(law - target).sum()


# ---------------------------------------------------------------------------
# criterion 2: scheme errors equal the underlying brick errors (n = 1024,
# BSC(0.11), 1e5 trials, overlapping 95% CIs)

def _overlap(a, b):
    return max(a[0], b[0]) <= min(a[1], b[1])


def test_sw_and_p2p_errors_match_brick_error():
    n, eps, trials, chunk = 1024, 0.11, 100_000, 5000
    joint = JointSource.from_factored(0.5, Dmc.bsc(eps))
    sw = sch.SlepianWolf.for_joint(joint, n, 3.0 / 32)
    rng = np.random.default_rng(20)
    llr_table = Dmc.bsc(eps).llr(np.arange(2))
    errs = 0
    for c in range(trials // chunk):
        xs = rng.integers(0, 2, size=(chunk, n), dtype=np.uint8)
        ys = xs ^ (rng.random(xs.shape) < eps).astype(np.uint8)
        out = sw.decode(sw.encode(xs), llr_table[ys], DitherStream(500 + c))
        errs += int((out != xs).any(axis=1).sum())
    ci_sw = pb.wilson_interval(errs, trials)
    _, ci_brick = pb.estimate_error_prob(sw.brick, symmetrize(joint),
                                         trials, np.random.default_rng(21))
    assert _overlap(ci_sw, ci_brick), (ci_sw, ci_brick)

    p2p = sch.P2PFromSw(sch.SlepianWolf.for_joint(joint, n, 3.0 / 32,
                                                  tag="acc.p2p"))
    errs = 0
    for c in range(trials // chunk):
        ms = rng.integers(0, 2, size=(chunk, p2p.k), dtype=np.uint8)
        stream = DitherStream(900 + c)
        xs = p2p.encode(ms, stream)
        ys = xs ^ (rng.random(xs.shape) < eps).astype(np.uint8)
        out = p2p.decode(llr_table[ys], stream)
        errs += int((out != ms).any(axis=1).sum())
    ci_p2p = pb.wilson_interval(errs, trials)
    _, ci_brick2 = pb.estimate_error_prob(p2p.sw.brick, Dmc.bsc(eps),
                                          trials, np.random.default_rng(22))
    assert _overlap(ci_p2p, ci_brick2), (ci_p2p, ci_brick2)


# ---------------------------------------------------------------------------
# criterion 3: lossy shaping accuracy (theta = 0.3, n = 1024, 1e4 trials,
# carrier rate backoff only - the shaping rate is exactly 1 - H(Xhat|X))

def test_lossy_shaping_tracks_distortion_and_bias_targets():
    theta, n, trials = 0.3, 1024, 10_000
    targets = (0.05, 0.10, 0.15, 0.20, 0.25)
    cfg = hz.ExperimentConfig.make("lossy", "d", targets, n, trials, 0,
                                   theta=theta, gamma_s=0.0, gamma_e=0.125)
    failures = []
    for res in hz.run(cfg):
        d = res.point
        alpha = (theta - d) / (1.0 - 2.0 * d)
        dist, _, _ = res.stats.distortion_ci()
        bias, _, _ = res.stats.bias_ci()
        if abs(dist - d) > 0.02:
            failures.append(f"D={d}: distortion {dist:.4f} off target by "
                            f"{dist - d:+.4f}")
        if abs(bias - alpha) > 0.02:
            failures.append(f"D={d}: bias {bias:.4f} off alpha={alpha:.4f}"
                            f" by {bias - alpha:+.4f}")
    assert not failures, "; ".join(failures)


# ---------------------------------------------------------------------------
# criterion 4: the achieved rate gap to H(0.3) - H(0.15) strictly shrinks
# across n in {256, 1024, 4096}

def test_rate_distortion_gap_shrinks_with_blocklength():
    cfg = hz.ExperimentConfig.make("lossy", "n", (256, 1024, 4096), 4096,
                                   2000, 0, theta=0.3, d=0.15,
                                   gamma_s=0.0, gamma_e=0.125)
    gaps = []
    for res in hz.run(cfg):
        rows = dict((name, v) for name, v, _, _ in res.rows)
        gaps.append(rows["rate_gap"])
    assert gaps[0] > gaps[1] > gaps[2], gaps


# ---------------------------------------------------------------------------
# criterion 5: state-at-encoder coding gain on Y = X + gS + Z
# (g = 0.9, theta = 0.1, n = 1024, R = 0.5, gamma = 3/16)

def test_state_channel_coding_gain():
    g, theta = 0.9, 0.1
    # (a) the optimized input law dominates the symmetric one in capacity
    for pdb in np.linspace(0.0, 9.5, 20):
        ch = StateChannel(10.0 ** (pdb / 10.0), g, theta)
        _, c_opt = optim.gp_target(ch, step=1.0 / 64, points=801)
        c_sym = float(np.atleast_1d(
            optim.gp_objective(ch, 0.5, 0.5, points=801))[0])
        assert c_opt >= c_sym - 1e-12, (pdb, c_opt, c_sym)
    # (b) Monte-Carlo block-error curves and their 1e-2 crossings
    grid = (2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0)
    curves = {}
    for kern in ("gp_gaussian", "gp_symmetric"):
        cfg = hz.ExperimentConfig.make(kern, "power_db", grid, 1024, 4000,
                                       0, g=g, theta=theta, rate=0.5,
                                       gamma=3.0 / 16)
        curves[kern] = hz.run(cfg)
    cross_gp = hz.threshold_crossing(
        grid, [r.stats.bler for r in curves["gp_gaussian"]], 1e-2)
    cross_sym = hz.threshold_crossing(
        grid, [r.stats.bler for r in curves["gp_symmetric"]], 1e-2)
    assert abs(cross_gp - 4.0) <= 0.75, cross_gp
    assert abs(cross_sym - 5.5) <= 0.75, cross_sym
    separated = 0
    for a, b in zip(curves["gp_gaussian"], curves["gp_symmetric"]):
        assert a.stats.bler < b.stats.bler, a.point
        if a.stats.bler_ci()[1] < b.stats.bler_ci()[0]:
            separated += 1
    assert separated >= 3, separated


# ---------------------------------------------------------------------------
# criterion 6: shaping spectra (rate 1 - H(0.25) + 1/16): the spectrum TV
# against Binom(n, 0.25) shrinks from n = 256 to n = 1024 (CI-separated),
# and chain inputs stay within the brick's spectrum TV + 0.02

def test_blockmarkov_shaping_spectra():
    alpha, reps, trials = 0.25, 8, 8000
    cis = {}
    for n in (256, 1024):
        k = _dims(n, 1.0 - hb(alpha) + 1.0 / 16)
        brick = pb.construct(Dmc.bsc(alpha), k, n, mode="shaping")
        tvs = np.array([
            bm.tv_w_vs_binom(
                bm.SpectrumW.estimate(brick, trials,
                                      np.random.default_rng(200 + r)),
                alpha)
            for r in range(reps)])
        half = 1.96 * tvs.std(ddof=1) / np.sqrt(reps)
        cis[n] = (tvs.mean() - half, tvs.mean() + half)
    assert cis[1024][1] < cis[256][0], cis
    # chain inputs: per-block weight law vs the brick's own spectrum,
    # estimated from matched sample counts so the Monte-Carlo bias cancels
    n, b, batch = 256, 4, 3000
    chain = bm.BmAsymChain.build(Dmc([[1.0, 0.0], [0.1, 0.9]]), alpha, n, b,
                                 1.0 / 4, 1.0 / 16, 3.0 / 16)
    rng = np.random.default_rng(7)
    tv_brick = bm.tv_w_vs_binom(
        bm.SpectrumW.estimate(chain.shaper, batch, rng), alpha)
    msgs = [rng.integers(0, 2, size=(batch, d), dtype=np.uint8)
            for d in chain.message_dims[1:]]
    xs = chain.encode(msgs, DitherStream(21))
    for x in xs[1:]:
        counts = np.bincount(x.sum(axis=1), minlength=n + 1)
        tv = bm.tv_w_vs_binom(bm.SpectrumW.from_counts(counts), alpha)
        assert tv <= tv_brick + 0.02, (tv, tv_brick)


# ---------------------------------------------------------------------------
# criterion 7: multi-user orderings at n = 512, 2e3 trials

def test_multiuser_orderings():
    n, trials, g = 512, 2000, 0.9
    # broadcast: the joint-law scheme beats every baseline with CI
    # separation at a common power point
    blers = {}
    for strat in hz.MARTON_STRATEGIES:
        cfg = hz.ExperimentConfig.make("marton", "power_db", (7.0,), n,
                                       trials, 0, strategy=strat, g=g,
                                       rsum=1.0, gamma=1.0 / 16,
                                       budget=150, points=601)
        res = hz.run(cfg)[0]
        blers[strat] = (res.stats.bler, res.stats.bler_ci())
    marton_hi = blers["marton"][1][1]
    for strat in ("sym_opt", "mmse", "zf", "td"):
        assert marton_hi < blers[strat][1][0], (strat, blers)
    # downlink relay network: more fronthaul strictly helps
    caps = ((0.5, 0.5), (0.75, 0.75), (1.0, 1.0))
    cfg = hz.ExperimentConfig.make("cran_dl", "caps", caps, n, trials, 0,
                                   power_db=5.0, g=g, rsum=0.75,
                                   gamma_r=1.0 / 8, gamma_c=5.0 / 32,
                                   budget=60, points=401)
    dl = [r.stats.bler for r in hz.run(cfg)]
    assert dl[0] > dl[1] > dl[2], dl
    # uplink relay network: binary quantization floors the error rate
    # while a capacity-relaxed control keeps improving with power
    powers = (3.0, 6.0, 9.0)
    ul = {}
    for caps_val, label in ((0.5, "fixed"), (8.0, "relaxed")):
        cfg = hz.ExperimentConfig.make("cran_ul", "power_db", powers, n,
                                       trials, 11, c1=caps_val, c2=caps_val,
                                       rsum=0.25, g=g, gamma_r=1.0 / 8,
                                       gamma_c=5.0 / 32, budget=40)
        ul[label] = [r.stats.bler for r in hz.run(cfg)]
    assert ul["fixed"][2] <= 3.0 * ul["fixed"][1], ul["fixed"]
    assert ul["relaxed"][0] > ul["relaxed"][1] > ul["relaxed"][2], \
        ul["relaxed"]


# ---------------------------------------------------------------------------
# criterion 8: bit-exact reductions on 1e3 shared-seed trials

def test_reduction_identities_bit_exact():
    n, trials = 256, 1000
    rng = np.random.default_rng(30)
    # degenerate side information turns distributed lossy coding into
    # plain lossy coding
    theta, d = 0.3, 0.1
    lossy = sch.LossyAsym.for_source(theta, d, n, 1.0 / 8, 1.0 / 8)
    wz = sch.WynerZiv.for_target(JointSource.degenerate(theta), d, n,
                                 1.0 / 8, 1.0 / 8)
    xs = (rng.random((trials, n)) < theta).astype(np.uint8)
    m1 = lossy.encode(xs, DitherStream(31))
    m2 = wz.encode(xs, DitherStream(31))
    assert np.array_equal(m1, m2)
    ys = np.zeros((trials, n), dtype=np.int64)
    assert np.array_equal(lossy.decode(m1, DitherStream(31)),
                          wz.decode(m2, wz.llr_hat_y(ys), DitherStream(31)))
    # a constant state turns state-aware coding into plain asymmetric
    # channel coding
    alpha = 0.4
    zch = Dmc(np.array([[1.0, 0.0], [0.1, 0.9]]))
    joint = JointSource.from_factored(alpha, zch)
    asym = sch.AsymChannel.build(joint, alpha, n, 3.0 / 16, 1.0 / 16)
    ms = rng.integers(0, 2, size=(trials, asym.msg_bits), dtype=np.uint8)
    x1 = asym.encode(ms, DitherStream(32))
    x2 = asym.gp.encode(ms, np.zeros((trials, n), dtype=np.uint8),
                        DitherStream(32))
    assert np.array_equal(x1, x2)
    llr = asym.gp.llr_xy(zch.sample(x1, rng))
    assert np.array_equal(asym.decode(llr, DitherStream(32)),
                          asym.gp.decode(llr, DitherStream(32)))
    # a product input law splits the broadcast encoder into two
    # independent asymmetric-channel codes
    from netbricks.channels import VectorChannel2x2
    gamma = 1.0 / 8
    vch = VectorChannel2x2(np.array([[1.0, 0.9], [0.9, 1.0]]),
                           np.sqrt(8.0 / 2) * np.eye(2))
    p_joint = np.outer([0.6, 0.4], [0.7, 0.3])
    marton = sch.build_marton_gaussian(vch, p_joint, n, gamma)
    mix1 = vch.user_mixture(0, 0.3, p_joint=p_joint)
    mix2 = vch.user_mixture(1, 0.4, p_joint=p_joint.T)
    asym1 = sch.AsymChannel.build(mix1, 0.4, n, gamma, 0.0, sym_outer=mix1,
                                  llr_xy=lambda y: mix1.sym_llr(y, 0),
                                  tag="u1")
    asym2 = sch.AsymChannel.build(mix2, 0.3, n, gamma, 0.0, sym_outer=mix2,
                                  llr_xy=lambda y: mix2.sym_llr(y, 0),
                                  tag="u2")
    m1 = rng.integers(0, 2, size=(trials, asym1.msg_bits), dtype=np.uint8)
    m2 = rng.integers(0, 2, size=(trials, asym2.msg_bits), dtype=np.uint8)
    x1, x2 = marton.encode(m1, m2, DitherStream(33))
    assert np.array_equal(x1, asym1.encode(m1, DitherStream(33)))
    assert np.array_equal(x2, asym2.encode(m2, DitherStream(33)))
    ys = vch.sample(np.stack([x1, x2], axis=-1), rng)
    assert np.array_equal(
        marton.decode1(ys[..., 0], DitherStream(33)),
        asym1.decode(mix1.sym_llr(ys[..., 0], 0), DitherStream(33)))
    assert np.array_equal(
        marton.decode2(ys[..., 1], DitherStream(33)),
        asym2.decode(mix2.sym_llr(ys[..., 1], 0), DitherStream(33)))
