"""Network coding schemes assembled from point-to-point polar bricks.

Every scheme follows the same template: syndromes and coset messages are
computed in the u-domain of the polar transform (one O(n log n) pass per
sequence), shared randomness comes from tag-derived dither streams so the
encoder and decoder reconstruct identical dithers without communicating,
and decoders receive observations as per-symbol LLRs so discrete and
Gaussian channels share one code path.

All encode/decode entry points are batch-first: sequences are (batch, n)
uint8 arrays and messages are (batch, bits) arrays.
"""

from __future__ import annotations

import zlib

import numpy as np

from . import polarbrick as pb
from .channels import (LLR_CLAMP, Dmc, GaussianMixtureJoint, JointSource, hb,
                       symmetrize)
from .gf2core import DimensionMismatch


class SchemeError(Exception):
    pass


class NestingViolation(SchemeError):
    pass


class FronthaulOverflow(SchemeError):
    pass


class BackhaulOverflow(SchemeError):
    pass


# ---------------------------------------------------------------------------
# shared randomness

class DitherStream:
    """Tag-addressed shared randomness.

    Both sides of a scheme construct streams from the same seed; a child
    stream is named by a string tag, so each dither has a stable identity
    independent of the order the two sides happen to consume them in.
    """

    def __init__(self, seed: int, _path=()):
        self.seed = int(seed)
        self._path = tuple(_path)
        self._rng = None

    def child(self, tag: str) -> "DitherStream":
        return DitherStream(self.seed, self._path + (zlib.crc32(tag.encode()),))

    @property
    def rng(self) -> np.random.Generator:
        if self._rng is None:
            ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self._path)
            self._rng = np.random.default_rng(ss)
        return self._rng

    def bits(self, shape) -> np.ndarray:
        return self.rng.integers(0, 2, size=shape, dtype=np.uint8)

    def permutation(self, n: int) -> np.ndarray:
        return self.rng.permutation(n)


def trial_stream(master_seed: int, counter: int) -> DitherStream:
    """Per-trial-batch stream derived by counter splitting."""
    return DitherStream(master_seed).child(f"trial.{counter}")


# ---------------------------------------------------------------------------
# u-domain coset plumbing shared by all schemes
#
# For a polar brick, H = (rows of the transform at the frozen indices), so
# the raw syndrome of x is the frozen part of the transformed sequence, and
# a deterministic coset representative for a syndrome is obtained by
# embedding it at the frozen indices and transforming back. Both sides use
# the same representative, which is all the constructions require.

def u_syndrome(brick: pb.PolarBrick, xs: np.ndarray) -> np.ndarray:
    """Raw syndrome H x of each row, length n - k."""
    return pb.polar_transform(xs)[..., ~brick.info_mask]


def coset_rep(brick: pb.PolarBrick, ts: np.ndarray) -> np.ndarray:
    """A sequence with syndrome t and zero information-domain content."""
    ts = np.atleast_2d(np.asarray(ts, dtype=np.uint8))
    u = np.zeros((ts.shape[0], brick.n), dtype=np.uint8)
    u[:, ~brick.info_mask] = ts
    return pb.polar_transform(u)


def uniform_cw(brick: pb.PolarBrick, vs: np.ndarray) -> np.ndarray:
    """v + rep(Hv): a uniform codeword when v is uniform."""
    u = pb.polar_transform(vs)
    u[..., ~brick.info_mask] = 0
    return pb.polar_transform(u)


def pair_rep(pair: pb.NestedPair, t1: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Coset representative for the stacked inner syndrome [t1; m]."""
    t1 = np.atleast_2d(np.asarray(t1, dtype=np.uint8))
    m = np.atleast_2d(np.asarray(m, dtype=np.uint8))
    u = np.zeros((t1.shape[0], pair.n), dtype=np.uint8)
    u[:, ~pair.outer.info_mask] = t1
    u[:, pair.extra] = m
    return pb.polar_transform(u)


def nested_syndrome_decode(pair: pb.NestedPair, t1: np.ndarray, m: np.ndarray,
                           llr: np.ndarray, stream: DitherStream,
                           tag: str) -> np.ndarray:
    """Decode a sequence from its stacked syndrome [t1; m] and observation
    LLRs using the inner brick of a nested pair (the common decoder step of
    every syndrome-conveyed scheme)."""
    t1 = np.atleast_2d(np.asarray(t1, dtype=np.uint8))
    w = stream.child(tag).bits((t1.shape[0], pair.n))
    a = pair_rep(pair, t1, m) ^ uniform_cw(pair.inner, w)
    llr = np.atleast_2d(np.asarray(llr, dtype=np.float64))
    c = pb.sc_decode_batch(pair.inner, (1.0 - 2.0 * a) * llr)
    return c ^ a


def composite_label(*bit_arrays) -> np.ndarray:
    """Pack binary arrays into integer labels, first array most significant."""
    out = np.zeros_like(np.asarray(bit_arrays[0]), dtype=np.int64)
    for b in bit_arrays:
        out = 2 * out + np.asarray(b, dtype=np.int64)
    return out


def pair_llr_table(joint: JointSource) -> np.ndarray:
    """Per-label LLR log p(0, y) / p(1, y) of a binary-input joint."""
    with np.errstate(divide="ignore"):
        t = np.log(joint.pxy[0]) - np.log(joint.pxy[1])
    return np.clip(t, -LLR_CLAMP, LLR_CLAMP)


def joint_from_table(p: np.ndarray, input_axis: int = 0) -> JointSource:
    """Flatten a multi-axis binary pmf into a JointSource; the remaining
    axes (in order) become composite observation labels."""
    p = np.moveaxis(np.asarray(p, dtype=float), input_axis, 0)
    return JointSource(np.ascontiguousarray(p).reshape(2, -1))


def _dims(n: int, rate: float, lo: int = 1) -> int:
    k = int(round(n * rate))
    return max(lo, min(n - 1, k))


def _llr_const(p1: float) -> float:
    p1 = min(max(p1, 1e-12), 1 - 1e-12)
    return float(np.log((1 - p1) / p1))


# ---------------------------------------------------------------------------
# Slepian-Wolf and its relatives

class SlepianWolf:
    """Syndrome code for recovering X from H-tilde X and side information Y.

    The decoder is the point-to-point brick for the symmetrized channel of
    p(x, y); observations enter as per-symbol LLRs log p_XY(0,y)/p_XY(1,y).
    """

    def __init__(self, n: int, k: int, sym_ch, tag: str = "sw"):
        self.n = n
        self.k = k
        self.brick = pb.construct(sym_ch, k, n)
        self.tag = tag

    @classmethod
    def for_joint(cls, joint, n: int, gamma: float, tag: str = "sw"):
        """Rate H(X|Y) + gamma; ``joint`` provides cond_entropy()."""
        k = _dims(n, 1.0 - joint.cond_entropy() - gamma)
        sym = symmetrize(joint) if hasattr(joint, "pxy") else joint
        return cls(n, k, sym, tag=tag)

    @property
    def rate(self) -> float:
        return (self.n - self.k) / self.n

    def encode(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.uint8)
        if xs.shape[-1] != self.n:
            raise DimensionMismatch("sequence length mismatch")
        return u_syndrome(self.brick, xs)

    def decode(self, ts: np.ndarray, llr_xy: np.ndarray,
               stream: DitherStream) -> np.ndarray:
        """Estimate x from syndromes ``ts`` and observation LLRs."""
        ts = np.atleast_2d(np.asarray(ts, dtype=np.uint8))
        llr_xy = np.atleast_2d(np.asarray(llr_xy, dtype=np.float64))
        v = stream.child(self.tag + ".v").bits((ts.shape[0], self.n))
        a = coset_rep(self.brick, ts) ^ uniform_cw(self.brick, v)
        c = pb.sc_decode_batch(self.brick, (1.0 - 2.0 * a) * llr_xy)
        return c ^ a


class Lossless:
    """Fixed-rate lossless code for a Bern(theta) source (degenerate Y)."""

    def __init__(self, n: int, k: int, theta: float, tag: str = "ll"):
        self.theta = theta
        self.sw = SlepianWolf(n, k, Dmc.bsc(theta), tag=tag)
        self.n, self.k = n, k

    @classmethod
    def for_source(cls, theta: float, n: int, gamma: float, tag: str = "ll"):
        k = _dims(n, 1.0 - hb(theta) - gamma)
        return cls(n, k, theta, tag=tag)

    @property
    def rate(self) -> float:
        return (self.n - self.k) / self.n

    def encode(self, xs: np.ndarray) -> np.ndarray:
        return self.sw.encode(xs)

    def decode(self, ts: np.ndarray, stream: DitherStream) -> np.ndarray:
        ts = np.atleast_2d(np.asarray(ts, dtype=np.uint8))
        llr = np.full((ts.shape[0], self.n), _llr_const(self.theta))
        return self.sw.decode(ts, llr, stream)


class P2PFromSw:
    """Channel code for a symmetric channel built on a Slepian-Wolf code.

    The transmitted word is codeword + dither; the decoder hands the
    dither's syndrome to the Slepian-Wolf decoder and strips the dither.
    """

    def __init__(self, sw: SlepianWolf, tag: str = "p2p"):
        self.sw = sw
        self.n, self.k = sw.n, sw.k
        self.tag = tag

    @property
    def rate(self) -> float:
        return self.k / self.n

    def _codeword(self, msgs: np.ndarray) -> np.ndarray:
        return self.sw.brick.encode_batch(np.atleast_2d(msgs))

    def encode(self, msgs: np.ndarray, stream: DitherStream) -> np.ndarray:
        c = self._codeword(msgs)
        v = stream.child(self.tag + ".v").bits(c.shape)
        return c ^ v

    def decode(self, llr_y: np.ndarray, stream: DitherStream) -> np.ndarray:
        llr_y = np.atleast_2d(np.asarray(llr_y, dtype=np.float64))
        v = stream.child(self.tag + ".v").bits((llr_y.shape[0], self.n))
        x_hat = self.sw.decode(u_syndrome(self.sw.brick, v), llr_y, stream)
        return self.sw.brick.message_of(x_hat ^ v)


# ---------------------------------------------------------------------------
# lossy source coding

class LossySym:
    """Lossy code for a uniform source at distortion D: one shaping brick."""

    def __init__(self, n: int, k: int, d: float):
        self.n, self.k, self.d = n, k, d
        self.brick = pb.construct(Dmc.bsc(d), k, n, mode="shaping")

    @classmethod
    def for_distortion(cls, d: float, n: int, gamma: float):
        return cls(n, _dims(n, 1.0 - hb(d) + gamma), d)

    @property
    def rate(self) -> float:
        return self.k / self.n

    def encode(self, xs: np.ndarray, stream: DitherStream) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=np.uint8))
        llr = (1.0 - 2.0 * xs) * _llr_const(self.d)
        cw = pb.sc_shape_batch(self.brick, llr, stream.child("lossy.shape").rng)
        return self.brick.message_of(cw)

    def decode(self, us: np.ndarray) -> np.ndarray:
        return self.brick.encode_batch(np.atleast_2d(us))


def _hx_given_xhat(alpha: float, d: float) -> float:
    """H(Xhat | X) for Xhat ~ Bern(alpha), X = Xhat + Bern(D) noise."""
    theta = alpha * (1 - d) + (1 - alpha) * d
    # H(Xhat|X) = H(Xhat) + H(X|Xhat) - H(X)
    return hb(alpha) + hb(d) - hb(theta)


def _lossy_joint(theta: float, d: float) -> JointSource:
    """Joint law of (reconstruction, source) for the BSC test channel."""
    alpha = (theta - d) / (1 - 2 * d)
    if 0.5 < alpha <= 0.5 + 1e-9:
        alpha = 0.5
    if not 0 < alpha <= 0.5:
        raise SchemeError("distortion target incompatible with the source bias")
    pxy = np.array([
        [(1 - alpha) * (1 - d), (1 - alpha) * d],
        [alpha * d, alpha * (1 - d)],
    ])
    # rows: xhat, cols: x
    return JointSource(pxy)


class WynerZiv:
    """Lossy code with decoder side information (Fig.-level wiring).

    Brick 1 shapes the reconstruction toward i.i.d. p(xhat); the coset
    index of the shaped sequence is conveyed through a Slepian-Wolf code
    for the pair (Xhat, Y). Lossy coding without side information is the
    degenerate-Y special case and shares this code path bit-for-bit.
    """

    def __init__(self, n: int, k1: int, k2: int, theta: float, d: float,
                 sym2, llr_hat_y, tag: str = "wz"):
        if not 0 <= k2 < k1:
            raise NestingViolation(f"need k2 < k1, got {k1}, {k2}")
        self.n, self.k1, self.k2 = n, k1, k2
        self.theta, self.d = theta, d
        self.alpha = (theta - d) / (1 - 2 * d)
        self.joint_hat_x = _lossy_joint(theta, d)
        sym1 = symmetrize(self.joint_hat_x)
        self.pair = pb.nested(sym1, sym2, k1, k2, n,
                              mode_outer="shaping", mode_inner="hard")
        self.llr_hat_y = llr_hat_y  # maps y-rows to LLRs log p(0,y)/p(1,y)
        self.tag = tag
        self._sym1 = sym1

    @classmethod
    def for_target(cls, joint_xy: JointSource, d: float, n: int,
                   gamma1: float, gamma2: float, tag: str = "wz"):
        theta = float(joint_xy.px()[1])
        alpha = (theta - d) / (1 - 2 * d)
        k1 = _dims(n, 1.0 - _hx_given_xhat(alpha, d) + gamma1)
        # joint of (Xhat, Y): Xhat -- X -- Y chain through the test channel
        p_x_given_hat = np.array([[1 - d, d], [d, 1 - d]])
        p_y_given_x = joint_xy.pxy / np.maximum(joint_xy.px()[:, None], 1e-300)
        p_hat = np.array([1 - alpha, alpha])
        pxy_hat = p_hat[:, None] * (p_x_given_hat @ p_y_given_x)
        j_hat_y = JointSource(pxy_hat)
        k2 = _dims(n, 1.0 - j_hat_y.cond_entropy() - gamma2, lo=0)
        sym2 = symmetrize(j_hat_y)
        llr_table = sym2.llr(np.arange(sym2.n_outputs))

        def llr_hat_y(ys):
            # plain source-pair LLR: the dither sign is applied by the
            # Slepian-Wolf decoder itself
            return llr_table[2 * np.asarray(ys, dtype=np.int64)]

        return cls(n, k1, k2, theta, d, sym2, llr_hat_y, tag=tag)

    @property
    def rate(self) -> float:
        return (self.k1 - self.k2) / self.n

    def encode_full(self, xs: np.ndarray, stream: DitherStream):
        """Compressed index plus the shaped reconstruction sequence."""
        xs = np.atleast_2d(np.asarray(xs, dtype=np.uint8))
        v = stream.child(self.tag + ".v").bits(xs.shape)
        sym1 = self._sym1
        llr_table = sym1.llr(np.arange(sym1.n_outputs))
        obs = 2 * xs.astype(np.int64) + v
        c1 = pb.sc_shape_batch(self.pair.outer, llr_table[obs],
                               stream.child(self.tag + ".shape").rng)
        u = c1 ^ v
        return self.pair.coset_message_batch(u), u

    def encode(self, xs: np.ndarray, stream: DitherStream) -> np.ndarray:
        return self.encode_full(xs, stream)[0]

    def decode(self, ms: np.ndarray, llr_y: np.ndarray,
               stream: DitherStream) -> np.ndarray:
        ms = np.atleast_2d(np.asarray(ms, dtype=np.uint8))
        v = stream.child(self.tag + ".v").bits((ms.shape[0], self.n))
        t1 = u_syndrome(self.pair.outer, v)
        return nested_syndrome_decode(self.pair, t1, ms, llr_y, stream,
                                      self.tag + ".sw.v")


class LossyAsym:
    """Lossy code for a Bern(theta) source: Wyner-Ziv with degenerate Y."""

    def __init__(self, wz: WynerZiv):
        self.wz = wz
        self.n = wz.n
        self.alpha = wz.alpha
        self.d = wz.d

    @classmethod
    def for_source(cls, theta: float, d: float, n: int,
                   gamma1: float, gamma2: float, tag: str = "wz"):
        wz = WynerZiv.for_target(JointSource.degenerate(theta), d, n,
                                 gamma1, gamma2, tag=tag)
        return cls(wz)

    @property
    def rate(self) -> float:
        return self.wz.rate

    def encode(self, xs: np.ndarray, stream: DitherStream) -> np.ndarray:
        return self.wz.encode(xs, stream)

    def encode_full(self, xs: np.ndarray, stream: DitherStream):
        return self.wz.encode_full(xs, stream)

    def decode(self, ms: np.ndarray, stream: DitherStream) -> np.ndarray:
        ms = np.atleast_2d(np.asarray(ms, dtype=np.uint8))
        ys = np.zeros((ms.shape[0], self.n), dtype=np.int64)
        return self.wz.decode(ms, self.wz.llr_hat_y(ys), stream)


# ---------------------------------------------------------------------------
# channels with state known at the encoder

class GelfandPinsker:
    """Channel code for p(y | x, s) with the state known at the encoder.

    The outer brick is a Slepian-Wolf code for p(x, y); the inner brick
    shapes the input toward i.i.d. p(x | s) by decoding the symmetrized
    channel of the pair (X, S). The message rides in the coset coordinates
    separating the two codes.
    """

    def __init__(self, n: int, k1: int, k2: int, sym_outer, sym_inner,
                 llr_x_given_s, llr_xy, tag: str = "gp"):
        if not 0 <= k2 < k1:
            raise NestingViolation(f"need k2 < k1, got {k1}, {k2}")
        self.n, self.k1, self.k2 = n, k1, k2
        self.pair = pb.nested(sym_outer, sym_inner, k1, k2, n,
                              mode_outer="hard", mode_inner="shaping")
        self.llr_x_given_s = llr_x_given_s  # s-rows -> LLR of the (X,S) pair
        self.llr_xy = llr_xy  # y-rows -> LLR of the (X,Y) pair
        self.tag = tag

    @property
    def rate(self) -> float:
        return (self.k1 - self.k2) / self.n

    @property
    def msg_bits(self) -> int:
        return self.k1 - self.k2

    def encode(self, ms: np.ndarray, s_obs, stream: DitherStream) -> np.ndarray:
        """Channel input for messages ``ms`` given the state observation."""
        ms = np.atleast_2d(np.asarray(ms, dtype=np.uint8))
        batch = ms.shape[0]
        v1 = stream.child(self.tag + ".v1").bits((batch, self.n - self.k1))
        v2 = stream.child(self.tag + ".v2").bits((batch, self.n))
        z = pair_rep(self.pair, v1, ms)
        u = z ^ uniform_cw(self.pair.inner, v2)
        llr = (1.0 - 2.0 * u) * np.atleast_2d(self.llr_x_given_s(s_obs))
        c2 = pb.sc_shape_batch(self.pair.inner, llr,
                               stream.child(self.tag + ".shape").rng)
        return c2 ^ u

    def decode_full(self, llr_y: np.ndarray, stream: DitherStream):
        """Message estimates plus the decoded channel-input sequences."""
        llr_y = np.atleast_2d(np.asarray(llr_y, dtype=np.float64))
        batch = llr_y.shape[0]
        v1 = stream.child(self.tag + ".v1").bits((batch, self.n - self.k1))
        w = stream.child(self.tag + ".sw.v").bits((batch, self.n))
        a = coset_rep(self.pair.outer, v1) ^ uniform_cw(self.pair.outer, w)
        c = pb.sc_decode_batch(self.pair.outer, (1.0 - 2.0 * a) * llr_y)
        x_hat = c ^ a
        return self.pair.coset_message_batch(x_hat), x_hat

    def decode(self, llr_y: np.ndarray, stream: DitherStream) -> np.ndarray:
        return self.decode_full(llr_y, stream)[0]


class AsymChannel:
    """Code for an asymmetric channel: state-free Gelfand-Pinsker.

    The shaping target is i.i.d. Bern(alpha); the state observation handed
    to the inner brick is identically zero.
    """

    def __init__(self, gp: GelfandPinsker, alpha: float):
        self.gp = gp
        self.alpha = alpha
        self.n = gp.n

    @classmethod
    def build(cls, joint_xy: JointSource, alpha: float, n: int,
              gamma1: float, gamma2: float, sym_outer=None, llr_xy=None,
              rate: float = None, tag: str = "gp"):
        """``joint_xy`` is the law of (X, Y) under X ~ Bern(alpha).

        A fixed message ``rate`` pins k1 - k2 directly, overriding gamma1.
        """
        if sym_outer is None:
            sym_outer = symmetrize(joint_xy)
            table = sym_outer.llr(np.arange(sym_outer.n_outputs))

            def llr_xy(ys):
                return table[2 * np.asarray(ys, dtype=np.int64)]

        k2 = _dims(n, 1.0 - hb(alpha) + gamma2, lo=0)
        if rate is None:
            k1 = _dims(n, 1.0 - joint_xy.cond_entropy() - gamma1)
        else:
            k1 = k2 + int(round(n * rate))
        const = _llr_const(alpha)

        def llr_x_given_s(s_obs):
            return np.full(np.asarray(s_obs).shape, const)

        gp = GelfandPinsker(n, k1, k2, sym_outer, Dmc.bsc(alpha),
                            llr_x_given_s, llr_xy, tag=tag)
        return cls(gp, alpha)

    @property
    def rate(self) -> float:
        return self.gp.rate

    @property
    def msg_bits(self) -> int:
        return self.gp.msg_bits

    def encode(self, ms: np.ndarray, stream: DitherStream) -> np.ndarray:
        ms = np.atleast_2d(np.asarray(ms, dtype=np.uint8))
        s = np.zeros((ms.shape[0], self.n), dtype=np.uint8)
        return self.gp.encode(ms, s, stream)

    def decode(self, llr_y: np.ndarray, stream: DitherStream) -> np.ndarray:
        return self.gp.decode(llr_y, stream)

    def decode_full(self, llr_y: np.ndarray, stream: DitherStream):
        return self.gp.decode_full(llr_y, stream)


def build_gp_state(ch, pxs, n: int, gamma1: float, rate: float = None,
                   tag: str = "gps") -> GelfandPinsker:
    """Gelfand-Pinsker code for a channel with additive Gaussian-mixture
    output and a binary state known at the encoder.

    ``ch`` carries the state law and the conditional input law is
    ``pxs = (p(x=1|s=0), p(x=1|s=1))``.  The shaping brick sits at the
    conditional-entropy limit; the error-correction brick backs off by
    ``gamma1`` unless a fixed message ``rate`` pins k1 - k2 directly.
    """
    mix = ch.mixture_given_x(pxs)
    joint_xs = ch.joint_xs(pxs)
    sym_in = symmetrize(joint_xs)
    in_table = sym_in.llr(np.arange(sym_in.n_outputs))
    k2 = _dims(n, 1.0 - joint_xs.cond_entropy(), lo=0)
    if rate is None:
        k1 = _dims(n, 1.0 - mix.cond_entropy() - gamma1)
    else:
        k1 = k2 + int(round(n * rate))

    def llr_x_given_s(ss):
        return in_table[2 * np.asarray(ss, dtype=np.int64)]

    return GelfandPinsker(n, k1, k2, mix, sym_in, llr_x_given_s,
                          lambda y: mix.sym_llr(y, 0), tag=tag)


def build_gp_symmetric(ch, n: int, rate: float, tag: str = "gpsym"):
    """Fixed-rate baseline for the state channel: a point-to-point code
    designed for the state-averaged output law under a uniform input."""
    mix = ch.mixture_given_x([0.5, 0.5])
    k = int(round(n * rate))
    sw = SlepianWolf(n, k, mix, tag=tag + ".sw")
    p2p = P2PFromSw(sw, tag=tag)
    return p2p, (lambda y: mix.sym_llr(y, 0))


# ---------------------------------------------------------------------------
# multiple access

class Mac:
    """Two-user multiple access code: two asymmetric-channel codes with
    successive cancellation at the decoder (user 1 first)."""

    def __init__(self, asym1: AsymChannel, asym2: AsymChannel, llr1, llr2):
        self.asym1 = asym1
        self.asym2 = asym2
        self.llr1 = llr1  # y-observations -> LLRs for user 1
        self.llr2 = llr2  # (y-observations, decoded x1) -> LLRs for user 2
        self.n = asym1.n

    @property
    def rates(self):
        return self.asym1.rate, self.asym2.rate

    def encode(self, m1: np.ndarray, m2: np.ndarray, stream: DitherStream):
        return (self.asym1.encode(m1, stream), self.asym2.encode(m2, stream))

    def decode(self, y_obs, stream: DitherStream):
        mh1, xh1 = self.asym1.decode_full(self.llr1(y_obs), stream)
        mh2 = self.asym2.decode(self.llr2(y_obs, xh1), stream)
        return mh1, mh2


def build_mac(py_given, p1: float, p2: float, n: int,
              gamma_r: float, gamma_s: float = 0.0, rates=None,
              tag1: str = "mac.u1", tag2: str = "mac.u2") -> Mac:
    """MAC code for a finite channel table ``py_given[x1, x2, y]`` with
    independent input biases p1, p2 (probability of bit 1).

    ``rates``, when given, pins the two message rates instead of gamma_r.
    """
    py_given = np.asarray(py_given, dtype=float)
    L = py_given.shape[-1]
    r1, r2 = rates if rates is not None else (None, None)
    px1 = np.array([1 - p1, p1])
    px2 = np.array([1 - p2, p2])
    # user 1 sees the x2-averaged channel
    p_y_x1 = np.einsum("b,aby->ay", px2, py_given)
    joint1 = JointSource(px1[:, None] * p_y_x1)
    asym1 = AsymChannel.build(joint1, p1, n, gamma_r, gamma_s, rate=r1,
                              tag=tag1)
    # user 2's observation is the pair (x1, y)
    p_x1y_x2 = np.einsum("a,aby->bay", px1, py_given).reshape(2, 2 * L)
    joint2 = JointSource(px2[:, None] * p_x1y_x2)
    asym2 = AsymChannel.build(joint2, p2, n, gamma_r, gamma_s, rate=r2,
                              tag=tag2)
    t1 = pair_llr_table(joint1)
    t2 = pair_llr_table(joint2)

    def llr1(ys):
        return t1[np.asarray(ys, dtype=np.int64)]

    def llr2(ys, xh1):
        return t2[np.asarray(xh1, dtype=np.int64) * L
                  + np.asarray(ys, dtype=np.int64)]

    return Mac(asym1, asym2, llr1, llr2)


# ---------------------------------------------------------------------------
# broadcast (Marton)

class Marton:
    """Two-user Marton code: an asymmetric-channel code for user 1 whose
    output doubles as the state sequence of a Gelfand-Pinsker code for
    user 2."""

    def __init__(self, asym1: AsymChannel, gp2: GelfandPinsker, llr_y1, llr_y2):
        self.asym1 = asym1
        self.gp2 = gp2
        self.llr_y1 = llr_y1
        self.llr_y2 = llr_y2
        self.n = asym1.n

    @property
    def rates(self):
        return self.asym1.rate, self.gp2.rate

    def encode(self, m1: np.ndarray, m2: np.ndarray, stream: DitherStream):
        x1 = self.asym1.encode(m1, stream)
        x2 = self.gp2.encode(m2, x1, stream)
        return x1, x2

    def decode1(self, y1, stream: DitherStream) -> np.ndarray:
        return self.asym1.decode(self.llr_y1(y1), stream)

    def decode2(self, y2, stream: DitherStream) -> np.ndarray:
        return self.gp2.decode(self.llr_y2(y2), stream)


def _cond_entropy_x2_given_x1(p_joint: np.ndarray) -> float:
    p_joint = np.asarray(p_joint, dtype=float)
    h = 0.0
    for a in (0, 1):
        pa = p_joint[a].sum()
        if pa > 0:
            h += pa * hb(p_joint[a, 1] / pa)
    return h


def build_marton_gaussian(vch, p_joint, n: int, gamma: float, rates=None,
                          tag1: str = "u1", tag2: str = "u2") -> Marton:
    """Marton code over a two-antenna Gaussian broadcast channel.

    ``p_joint`` is the target input law p(x1, x2); the error-correction
    bricks back off by ``gamma`` while the shaping bricks sit at the
    theoretical limit.  ``rates``, when given, pins the two message rates
    instead of gamma.
    """
    p_joint = np.asarray(p_joint, dtype=float)
    r1, r2 = rates if rates is not None else (None, None)
    a1 = float(p_joint[1].sum())   # P{X1 = 1}
    a2 = float(p_joint[:, 1].sum())
    mix1 = vch.user_mixture(0, a2, p_joint=p_joint)
    mix2 = vch.user_mixture(1, a1, p_joint=p_joint.T)
    asym1 = AsymChannel.build(
        mix1, a1, n, gamma, 0.0, sym_outer=mix1,
        llr_xy=lambda y: mix1.sym_llr(y, 0), rate=r1, tag=tag1)
    # Gelfand-Pinsker brick for user 2 with state X1
    joint_21 = JointSource(p_joint.T)  # rows x2, cols x1
    sym_in = symmetrize(joint_21)
    in_table = sym_in.llr(np.arange(sym_in.n_outputs))
    k22 = _dims(n, 1.0 - _cond_entropy_x2_given_x1(p_joint), lo=0)
    if r2 is None:
        k21 = _dims(n, 1.0 - mix2.cond_entropy() - gamma)
    else:
        k21 = k22 + int(round(n * r2))

    def llr_x_given_s(ss):
        return in_table[2 * np.asarray(ss, dtype=np.int64)]

    gp2 = GelfandPinsker(n, k21, k22, mix2, sym_in, llr_x_given_s,
                         lambda y: mix2.sym_llr(y, 0), tag=tag2)
    return Marton(asym1, gp2,
                  lambda y: mix1.sym_llr(y, 0), lambda y: mix2.sym_llr(y, 0))


def build_symmetric_bc(vch, n: int, gamma: float, rates=None):
    """Baseline for the broadcast channel: two independent uniform-input
    point-to-point codes (any precoding lives inside ``vch``).

    ``rates``, when given, pins the two message rates instead of gamma.
    """
    out = []
    for user in (0, 1):
        mix = vch.user_mixture(user, 0.5)
        if rates is None:
            sw = SlepianWolf.for_joint(mix, n, gamma, tag=f"sym.u{user}")
        else:
            sw = SlepianWolf(n, int(round(n * rates[user])), mix,
                             tag=f"sym.u{user}")
        out.append(P2PFromSw(sw, tag=f"sym.p2p{user}"))
    return tuple(out)


# ---------------------------------------------------------------------------
# distributed lossy compression (Berger-Tung)

class BergerTung:
    """Distributed compression of correlated sources: a lossy code for the
    first source, a Wyner-Ziv code for the second with the first
    reconstruction as decoder side information."""

    def __init__(self, lossy1: LossyAsym, wz2: WynerZiv):
        self.lossy1 = lossy1
        self.wz2 = wz2
        self.n = lossy1.n

    @classmethod
    def build(cls, p12, d1: float, d2: float, n: int,
              gamma_s: float, gamma_e: float,
              tag1: str = "bt1", tag2: str = "bt2"):
        """``p12`` is the source law p(x1, x2) as a 2x2 table."""
        p12 = np.asarray(p12, dtype=float)
        theta1 = float(p12[1].sum())
        lossy1 = LossyAsym.for_source(theta1, d1, n, gamma_s, gamma_e, tag=tag1)
        # joint of (X2, Xhat1) through the first test channel
        j1 = lossy1.wz.joint_hat_x  # rows xhat1, cols x1
        p_hat1_given_x1 = j1.pxy / np.maximum(j1.pxy.sum(axis=0), 1e-300)
        p_x2_hat1 = np.einsum("ab,ha->bh", p12, p_hat1_given_x1)
        wz2 = WynerZiv.for_target(JointSource(p_x2_hat1), d2, n,
                                  gamma_s, gamma_e, tag=tag2)
        return cls(lossy1, wz2)

    @property
    def rates(self):
        return self.lossy1.rate, self.wz2.rate

    def encode(self, x1s: np.ndarray, x2s: np.ndarray, stream: DitherStream):
        return (self.lossy1.encode(x1s, stream), self.wz2.encode(x2s, stream))

    def decode(self, m1: np.ndarray, m2: np.ndarray, stream: DitherStream):
        xh1 = self.lossy1.decode(m1, stream)
        xh2 = self.wz2.decode(m2, self.wz2.llr_hat_y(xh1), stream)
        return xh1, xh2


# ---------------------------------------------------------------------------
# multiple descriptions

class Mdc:
    """Two-description code with a central decoder.

    Three shaped sequences are generated successively (each conditioned on
    the previous ones and the source); the central refinement is conveyed
    by a Slepian-Wolf code with the two side descriptions as decoder side
    information.
    """

    def __init__(self, theta, pairs, llr_tables, p_hats, tag: str = "mdc"):
        # pairs/llr_tables/p_hats are 3-tuples ordered (desc1, desc2, central)
        self.theta = theta
        self.pair1, self.pair2, self.pair0 = pairs
        self.t1, self.t2, self.t0 = llr_tables  # shaping tables
        self.p_hat1, self.p_hat2, self.sw0_table = p_hats
        self.n = self.pair1.n
        self.tag = tag

    @classmethod
    def build(cls, theta: float, d0: float, d1: float, d2: float, n: int,
              gamma_s: float, gamma_e: float, tag: str = "mdc"):
        """Reconstructions are conditionally independent given the source,
        each through its own backward test channel at distortion d_j."""
        px = np.array([1 - theta, theta])
        conds = []
        for d in (d0, d1, d2):
            alpha = (theta - d) / (1 - 2 * d)
            if not 0 < alpha <= 0.5:
                raise SchemeError("distortion incompatible with the source")
            p_hat = np.array([1 - alpha, alpha])
            flip = np.array([[1 - d, d], [d, 1 - d]])
            jt = p_hat[:, None] * flip  # p(xhat, x)
            conds.append(jt.T / px[:, None])  # p(xhat | x), rows x
        c0, c1, c2 = conds
        # p[x, xhat0, xhat1, xhat2]
        p4 = (px[:, None, None, None] * c0[:, :, None, None]
              * c1[:, None, :, None] * c2[:, None, None, :])
        # description 1: shaping channel p(xhat1; x), lossless Bern carrier
        j1 = joint_from_table(p4.sum(axis=(1, 3)), input_axis=1)
        a1 = float(j1.px()[1])
        k11 = _dims(n, 1.0 - j1.cond_entropy() + gamma_s)
        k12 = _dims(n, 1.0 - hb(a1) - gamma_e, lo=0)
        pair1 = pb.nested(symmetrize(j1), Dmc.bsc(a1), k11, k12, n,
                          mode_outer="shaping", mode_inner="hard")
        # description 2: shaping channel p(xhat2; (xhat1, x))
        j2 = joint_from_table(p4.sum(axis=1).transpose(2, 1, 0), input_axis=0)
        # table above: [xhat2, xhat1, x] -> labels (xhat1, x)
        a2 = float(j2.px()[1])
        k21 = _dims(n, 1.0 - j2.cond_entropy() + gamma_s)
        k22 = _dims(n, 1.0 - hb(a2) - gamma_e, lo=0)
        pair2 = pb.nested(symmetrize(j2), Dmc.bsc(a2), k21, k22, n,
                          mode_outer="shaping", mode_inner="hard")
        # central: shaping channel p(xhat0; (xhat1, xhat2, x)), Slepian-Wolf
        # carrier for the pair (xhat0, (xhat1, xhat2))
        j0 = joint_from_table(p4.transpose(1, 2, 3, 0), input_axis=0)
        k01 = _dims(n, 1.0 - j0.cond_entropy() + gamma_s)
        j0sw = joint_from_table(p4.sum(axis=0), input_axis=0)
        k02 = _dims(n, 1.0 - j0sw.cond_entropy() - gamma_e, lo=0)
        pair0 = pb.nested(symmetrize(j0), symmetrize(j0sw), k01, k02, n,
                          mode_outer="shaping", mode_inner="hard")
        return cls(theta, (pair1, pair2, pair0),
                   (pair_llr_table(j1), pair_llr_table(j2), pair_llr_table(j0)),
                   (a1, a2, pair_llr_table(j0sw)), tag=tag)

    @property
    def rates(self):
        r1 = (self.pair1.k1 - self.pair1.k2) / self.n
        r2 = ((self.pair2.k1 - self.pair2.k2)
              + (self.pair0.k1 - self.pair0.k2)) / self.n
        return r1, r2

    def _shape(self, pair, llr, v, stream, tag):
        cw = pb.sc_shape_batch(pair.outer, (1.0 - 2.0 * v) * llr,
                               stream.child(tag).rng)
        return cw ^ v

    def encode(self, xs: np.ndarray, stream: DitherStream):
        xs = np.atleast_2d(np.asarray(xs, dtype=np.uint8))
        v1 = stream.child(self.tag + ".v1").bits(xs.shape)
        u1 = self._shape(self.pair1, self.t1[composite_label(xs)], v1,
                         stream, self.tag + ".sh1")
        v2 = stream.child(self.tag + ".v2").bits(xs.shape)
        u2 = self._shape(self.pair2, self.t2[composite_label(u1, xs)], v2,
                         stream, self.tag + ".sh2")
        v0 = stream.child(self.tag + ".v0").bits(xs.shape)
        u0 = self._shape(self.pair0, self.t0[composite_label(u1, u2, xs)], v0,
                         stream, self.tag + ".sh0")
        m1 = pb.polar_transform(u1)[:, self.pair1.extra]
        m22 = pb.polar_transform(u2)[:, self.pair2.extra]
        m02 = pb.polar_transform(u0)[:, self.pair0.extra]
        return m1, (m22, m02)

    def _desc_decode(self, pair, m, alpha, batch, v_tag, w_tag, stream):
        v = stream.child(v_tag).bits((batch, self.n))
        llr = np.full((batch, self.n), _llr_const(alpha))
        return nested_syndrome_decode(pair, u_syndrome(pair.outer, v), m,
                                      llr, stream, w_tag)

    def decode1(self, m1: np.ndarray, stream: DitherStream) -> np.ndarray:
        m1 = np.atleast_2d(np.asarray(m1, dtype=np.uint8))
        return self._desc_decode(self.pair1, m1, self.p_hat1, m1.shape[0],
                                 self.tag + ".v1", self.tag + ".d1", stream)

    def decode2(self, m2, stream: DitherStream) -> np.ndarray:
        m22 = np.atleast_2d(np.asarray(m2[0], dtype=np.uint8))
        return self._desc_decode(self.pair2, m22, self.p_hat2, m22.shape[0],
                                 self.tag + ".v2", self.tag + ".d2", stream)

    def decode0(self, m1, m2, stream: DitherStream) -> np.ndarray:
        xh1 = self.decode1(m1, stream)
        xh2 = self.decode2(m2, stream)
        m02 = np.atleast_2d(np.asarray(m2[1], dtype=np.uint8))
        v0 = stream.child(self.tag + ".v0").bits((m02.shape[0], self.n))
        llr = self.sw0_table[composite_label(xh1, xh2)]
        return nested_syndrome_decode(
            self.pair0, u_syndrome(self.pair0.outer, v0), m02, llr,
            stream, self.tag + ".d0")


# ---------------------------------------------------------------------------
# downlink C-RAN

def _mixture_from_cond(eff_row, p_cond, p_u1: float):
    """Gaussian mixture of one user's output given a binary auxiliary with
    conditional relay-input law ``p_cond[u]`` (2x2 tables over (x1, x2))."""
    means, weights = [], []
    for uv in (0, 1):
        mu, w = [], []
        for x1v in (0, 1):
            for x2v in (0, 1):
                mu.append(eff_row[0] * (1 - 2 * x1v) + eff_row[1] * (1 - 2 * x2v))
                w.append(p_cond[uv][x1v, x2v])
        means.append(mu)
        weights.append(w)
    return GaussianMixtureJoint(p_u1, means[0], weights[0],
                                means[1], weights[1])


class CranDl:
    """Downlink cloud radio access network with two relays and two users.

    The central processor runs a Marton encoder over auxiliary sequences
    (u1, u2), then compresses the relay inputs (x1, x2) with two nested
    lossy codes whose coset rates must fit the fronthaul capacities.
    """

    def __init__(self, asym1: AsymChannel, gp2: GelfandPinsker,
                 pair3, pair4, theta_x1, theta_x2, t3, t4,
                 c1: float, c2: float, tag: str = "dl"):
        n = asym1.n
        if pair3.k1 - pair3.k2 >= n * c1:
            raise FronthaulOverflow(
                f"relay-1 coset rate {(pair3.k1 - pair3.k2) / n:.4f} "
                f"exceeds fronthaul capacity {c1}")
        if pair4.k1 - pair4.k2 >= n * c2:
            raise FronthaulOverflow(
                f"relay-2 coset rate {(pair4.k1 - pair4.k2) / n:.4f} "
                f"exceeds fronthaul capacity {c2}")
        self.asym1, self.gp2 = asym1, gp2
        self.pair3, self.pair4 = pair3, pair4
        self.theta_x1, self.theta_x2 = theta_x1, theta_x2
        self.t3, self.t4 = t3, t4
        self.n = n
        self.tag = tag

    @classmethod
    def build(cls, p4, vch, c1: float, c2: float, n: int,
              gamma_r: float, gamma_c: float, rates=None, tag: str = "dl"):
        """``p4[u1, u2, x1, x2]`` is the target joint law; ``vch`` carries
        the channel gains and per-relay power allocation.  ``rates``, when
        given, pins the two message rates instead of gamma_r."""
        p4 = np.asarray(p4, dtype=float)
        r1, r2 = rates if rates is not None else (None, None)
        p_u1 = float(p4.sum(axis=(1, 2, 3))[1])
        # user 1: mixture of y1 given u1
        cond1 = [p4[u].sum(axis=0) / max(p4[u].sum(), 1e-300) for u in (0, 1)]
        mix1 = _mixture_from_cond(vch.eff[0], cond1, p_u1)
        asym1 = AsymChannel.build(
            mix1, p_u1, n, gamma_r, 0.0, sym_outer=mix1,
            llr_xy=lambda y: mix1.sym_llr(y, 0), rate=r1, tag=tag + ".u1")
        # user 2: Gelfand-Pinsker with state u1
        p_u2 = float(p4.sum(axis=(0, 2, 3))[1])
        cond2 = [p4[:, u].sum(axis=0) / max(p4[:, u].sum(), 1e-300)
                 for u in (0, 1)]
        mix2 = _mixture_from_cond(vch.eff[1], cond2, p_u2)
        j21 = joint_from_table(p4.sum(axis=(2, 3)), input_axis=1)  # (u2, u1)
        sym_in = symmetrize(j21)
        in_table = sym_in.llr(np.arange(sym_in.n_outputs))
        k22 = _dims(n, 1.0 - j21.cond_entropy(), lo=0)
        if r2 is None:
            k21 = _dims(n, 1.0 - mix2.cond_entropy() - gamma_r)
        else:
            k21 = k22 + int(round(n * r2))
        gp2 = GelfandPinsker(
            n, k21, k22, mix2, sym_in,
            lambda ss: in_table[2 * np.asarray(ss, dtype=np.int64)],
            lambda y: mix2.sym_llr(y, 0), tag=tag + ".u2")
        # relay compressors
        j3 = joint_from_table(p4.sum(axis=3).transpose(2, 0, 1), input_axis=0)
        theta_x1 = float(j3.px()[1])
        k31 = _dims(n, 1.0 - j3.cond_entropy())
        k32 = _dims(n, 1.0 - hb(theta_x1) - gamma_c, lo=0)
        pair3 = pb.nested(symmetrize(j3), Dmc.bsc(theta_x1), k31, k32, n,
                          mode_outer="shaping", mode_inner="hard")
        j4 = joint_from_table(p4.transpose(3, 0, 1, 2), input_axis=0)
        theta_x2 = float(j4.px()[1])
        k41 = _dims(n, 1.0 - j4.cond_entropy())
        k42 = _dims(n, 1.0 - hb(theta_x2) - gamma_c, lo=0)
        pair4 = pb.nested(symmetrize(j4), Dmc.bsc(theta_x2), k41, k42, n,
                          mode_outer="shaping", mode_inner="hard")
        return cls(asym1, gp2, pair3, pair4, theta_x1, theta_x2,
                   pair_llr_table(j3), pair_llr_table(j4), c1, c2, tag=tag)

    @property
    def rates(self):
        return self.asym1.rate, self.gp2.rate

    @property
    def fronthaul_rates(self):
        return ((self.pair3.k1 - self.pair3.k2) / self.n,
                (self.pair4.k1 - self.pair4.k2) / self.n)

    def cp_encode(self, m1: np.ndarray, m2: np.ndarray, stream: DitherStream):
        """Fronthaul indices; also returns the composed sequences for
        inspection by simulations."""
        u1 = self.asym1.encode(m1, stream)
        u2 = self.gp2.encode(m2, u1, stream)
        v3 = stream.child(self.tag + ".v3").bits(u1.shape)
        c31 = pb.sc_shape_batch(
            self.pair3.outer,
            (1.0 - 2.0 * v3) * self.t3[composite_label(u1, u2)],
            stream.child(self.tag + ".sh3").rng)
        x1 = c31 ^ v3
        v4 = stream.child(self.tag + ".v4").bits(u1.shape)
        c41 = pb.sc_shape_batch(
            self.pair4.outer,
            (1.0 - 2.0 * v4) * self.t4[composite_label(u1, u2, x1)],
            stream.child(self.tag + ".sh4").rng)
        x2 = c41 ^ v4
        m3 = pb.polar_transform(x1)[:, self.pair3.extra]
        m4 = pb.polar_transform(x2)[:, self.pair4.extra]
        return (m3, m4), (u1, u2, x1, x2)

    def relay_sequence(self, j: int, m: np.ndarray,
                       stream: DitherStream) -> np.ndarray:
        pair = self.pair3 if j == 0 else self.pair4
        theta = self.theta_x1 if j == 0 else self.theta_x2
        m = np.atleast_2d(np.asarray(m, dtype=np.uint8))
        v = stream.child(self.tag + f".v{3 + j}").bits((m.shape[0], self.n))
        llr = np.full((m.shape[0], self.n), _llr_const(theta))
        return nested_syndrome_decode(pair, u_syndrome(pair.outer, v), m,
                                      llr, stream, self.tag + f".r{j}")

    def user_decode(self, j: int, y_rows, stream: DitherStream) -> np.ndarray:
        if j == 0:
            return self.asym1.decode(self.asym1.gp.llr_xy(y_rows), stream)
        return self.gp2.decode(self.gp2.llr_xy(y_rows), stream)


# ---------------------------------------------------------------------------
# uplink C-RAN

class CranUl:
    """Uplink cloud radio access network: a MAC code for the users and a
    distributed (Berger-Tung) compressor at the relays, whose rates must
    fit the backhaul capacities."""

    def __init__(self, mac: Mac, bt: BergerTung, c1: float, c2: float):
        r3, r4 = bt.rates
        if r3 >= c1:
            raise BackhaulOverflow(
                f"relay-1 compression rate {r3:.4f} exceeds capacity {c1}")
        if r4 >= c2:
            raise BackhaulOverflow(
                f"relay-2 compression rate {r4:.4f} exceeds capacity {c2}")
        self.mac = mac
        self.bt = bt
        self.n = mac.n

    @property
    def rates(self):
        return self.mac.rates

    def encode_users(self, m1, m2, stream: DitherStream):
        return self.mac.encode(m1, m2, stream)

    def relay_encode(self, j: int, y_bits: np.ndarray,
                     stream: DitherStream) -> np.ndarray:
        if j == 0:
            return self.bt.lossy1.encode(y_bits, stream)
        return self.bt.wz2.encode(y_bits, stream)

    def cp_decode(self, m3, m4, stream: DitherStream):
        yh1, yh2 = self.bt.decode(m3, m4, stream)
        return self.mac.decode(composite_label(yh1, yh2), stream)


def build_cran_ul(p1: float, p2: float, power: float, g: float,
                  quant1, quant2, d1: float, d2: float,
                  c1: float, c2: float, n: int,
                  gamma_r: float, gamma_c: float, rates=None) -> CranUl:
    """Uplink C-RAN over a binary-quantized Gaussian channel.

    ``quant1``/``quant2`` are binary quantizers for the relay front ends;
    the relays compress their quantized observations at distortions d1, d2.
    """
    from scipy.stats import norm
    amp = float(np.sqrt(power))
    thr1 = float(quant1.boundaries[0])
    thr2 = float(quant2.boundaries[0])
    # p(y_j = 1 | x1, x2): quantizer cell above the boundary is labeled 1
    py1 = np.zeros((2, 2))
    py2 = np.zeros((2, 2))
    for x1v in (0, 1):
        for x2v in (0, 1):
            s1, s2 = 1 - 2 * x1v, 1 - 2 * x2v
            py1[x1v, x2v] = norm.sf(thr1 - (amp * s1 + g * amp * s2))
            py2[x1v, x2v] = norm.sf(thr2 - (amp * s2 + g * amp * s1))
    px1 = np.array([1 - p1, p1])
    px2 = np.array([1 - p2, p2])
    # joint law of the quantized observations
    p_y12 = np.zeros((2, 2))
    for x1v in (0, 1):
        for x2v in (0, 1):
            w = px1[x1v] * px2[x2v]
            for y1v in (0, 1):
                for y2v in (0, 1):
                    q1 = py1[x1v, x2v] if y1v else 1 - py1[x1v, x2v]
                    q2 = py2[x1v, x2v] if y2v else 1 - py2[x1v, x2v]
                    p_y12[y1v, y2v] += w * q1 * q2
    bt = BergerTung.build(p_y12, d1, d2, n, gamma_c / 2, gamma_c / 2,
                          tag1="ul.r1", tag2="ul.r2")
    # conditionals p(yhat_j | y_j) induced by the compressors
    jh1 = bt.lossy1.wz.joint_hat_x  # rows yhat1, cols y1
    p_h1_y1 = jh1.pxy / np.maximum(jh1.pxy.sum(axis=0), 1e-300)
    jh2 = bt.wz2.joint_hat_x
    p_h2_y2 = jh2.pxy / np.maximum(jh2.pxy.sum(axis=0), 1e-300)
    # MAC channel table p(yhat1 yhat2 | x1 x2), labels 2*yhat1 + yhat2
    table = np.zeros((2, 2, 4))
    for x1v in (0, 1):
        for x2v in (0, 1):
            for y1v in (0, 1):
                for y2v in (0, 1):
                    q1 = py1[x1v, x2v] if y1v else 1 - py1[x1v, x2v]
                    q2 = py2[x1v, x2v] if y2v else 1 - py2[x1v, x2v]
                    for h1 in (0, 1):
                        for h2 in (0, 1):
                            table[x1v, x2v, 2 * h1 + h2] += (
                                q1 * q2 * p_h1_y1[h1, y1v] * p_h2_y2[h2, y2v])
    mac = build_mac(table, p1, p2, n, gamma_r, 0.0, rates=rates,
                    tag1="ul.u1", tag2="ul.u2")
    return CranUl(mac, bt, c1, c2)
