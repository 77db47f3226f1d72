"""Block-Markov coding chains built on easily-verifiable code properties.

The schemes module assumes a small shaping distance, a total-variation
quantity over an exponentially large alphabet that cannot be estimated for
an arbitrary off-the-shelf code. The constructions here replace it with two
Monte-Carlo-estimable statistics — the shaping Hamming-distance spectrum and
the shaping joint-type spectrum — and drop all nesting requirements between
the constituent codes. The price is a block-Markov structure: b blocks are
encoded in reverse order, each block's carried index depending on the next
block's sequence, and decoded forward with a window of two blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import polarbrick as pb
from .channels import LLR_CLAMP, Dmc, JointSource, hb, symmetrize
from .schemes import (DitherStream, P2PFromSw, SchemeError, SlepianWolf,
                      _dims, _llr_const, _lossy_joint, coset_rep, u_syndrome,
                      uniform_cw)


# ---------------------------------------------------------------------------
# spectra

@dataclass
class SpectrumW:
    """Histogram of the shaping Hamming distance d_H(V, phi(V)) over uniform
    dither sequences V; ``counts[w]`` trials landed at distance w."""

    counts: np.ndarray
    trials: int

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.sum() != self.trials:
            raise SchemeError("spectrum counts must sum to the trial count")

    @property
    def n(self) -> int:
        return self.counts.size - 1

    @classmethod
    def from_counts(cls, counts) -> "SpectrumW":
        counts = np.asarray(counts, dtype=np.int64)
        return cls(counts, int(counts.sum()))

    @classmethod
    def estimate(cls, brick: pb.PolarBrick, trials: int, rng,
                 ch=None) -> "SpectrumW":
        return cls.from_counts(pb.estimate_w_spectrum(brick, trials, rng, ch))


@dataclass
class SpectrumT:
    """Histogram over joint types: each key is a flattened occupancy vector
    (counts of each symbol pair, summing to n)."""

    counts: dict
    trials: int
    n: int

    def __post_init__(self):
        for t in self.counts:
            if sum(t) != self.n:
                raise SchemeError("each joint type must sum to n")
        if sum(self.counts.values()) != self.trials:
            raise SchemeError("spectrum counts must sum to the trial count")

    @classmethod
    def from_samples(cls, types: np.ndarray) -> "SpectrumT":
        """``types`` is (trials, ...) with one occupancy vector per row."""
        types = np.asarray(types, dtype=np.int64).reshape(types.shape[0], -1)
        counts: dict = {}
        for row in types:
            key = tuple(int(v) for v in row)
            counts[key] = counts.get(key, 0) + 1
        return cls(counts, types.shape[0], int(types[0].sum()))

    @classmethod
    def estimate(cls, brick: pb.PolarBrick, ch, trials: int,
                 rng) -> "SpectrumT":
        return cls.from_samples(pb.estimate_t_spectrum(brick, ch, trials, rng))


def tv_w_vs_binom(spec: SpectrumW, alpha: float) -> float:
    """Total variation between the empirical W spectrum and Binom(n, alpha)."""
    if spec.trials < 1:
        raise SchemeError("need at least one trial")
    pmf = stats.binom.pmf(np.arange(spec.n + 1), spec.n, alpha)
    emp = spec.counts / spec.trials
    return 0.5 * float(np.abs(emp - pmf).sum())


def tv_t_vs_multinomial(spec: SpectrumT, probs) -> float:
    """Total variation between the empirical joint-type spectrum and a
    Multinomial(n; probs) law; probability mass on unobserved types enters
    through the complement of what the observed types cover."""
    if spec.trials < 1:
        raise SchemeError("need at least one trial")
    probs = np.asarray(probs, dtype=float).ravel()
    total = 0.0
    covered = 0.0
    for t, c in spec.counts.items():
        p = float(stats.multinomial.pmf(np.asarray(t), spec.n, probs))
        total += abs(c / spec.trials - p)
        covered += p
    return 0.5 * (total + max(0.0, 1.0 - covered))


# ---------------------------------------------------------------------------
# asymmetric-channel chain

class BmAsymChain:
    """Block-Markov code for an asymmetric channel p(y | x).

    Three independent (non-nested) codes cooperate: a Slepian-Wolf code for
    p(x) p(y | x) recovers each block's input at the receiver; a shaping code
    for BSC(alpha) with a near-Binom(n, alpha) W spectrum steers the channel
    input toward Bern(alpha); a plain symmetric-capacity code bootstraps the
    first block by carrying the second block's syndrome. Each block's carried
    vector packs the next block's syndrome and that block's message into the
    shaping code's syndrome frame, so encoding runs in reverse block order
    and decoding forward.
    """

    def __init__(self, sw: SlepianWolf, shaper: pb.PolarBrick,
                 bootstrap: P2PFromSw, alpha: float, b: int,
                 llr_table: np.ndarray, llr_table_sym: np.ndarray,
                 tag: str = "bm", use_dither: bool = True,
                 use_permutation: bool = True):
        if b < 2:
            raise SchemeError("need at least two blocks")
        if shaper.k >= sw.k:
            raise SchemeError("shaping dimension must be below the "
                              "Slepian-Wolf dimension")
        if bootstrap.sw.k < sw.n - sw.k:
            raise SchemeError("bootstrap code cannot carry the syndrome")
        self.sw = sw
        self.shaper = shaper
        self.bootstrap = bootstrap
        self.alpha = alpha
        self.b = b
        self.n = sw.n
        self.k1 = sw.k
        self.k2 = shaper.k
        self.llr_table = llr_table  # y -> log p(0, y) / p(1, y)
        self.llr_table_sym = llr_table_sym  # y -> log p(y|0) / p(y|1)
        self.tag = tag
        self.use_dither = use_dither
        self.use_permutation = use_permutation

    @classmethod
    def build(cls, ch: Dmc, alpha: float, n: int, b: int, gamma_sw: float,
              gamma_shape: float, gamma_sym: float, tag: str = "bm",
              use_dither: bool = True, use_permutation: bool = True):
        joint = JointSource.from_factored(alpha, ch)
        sw = SlepianWolf.for_joint(joint, n, gamma_sw, tag=tag + ".sw")
        k2 = _dims(n, 1.0 - hb(alpha) + gamma_shape)
        shaper = pb.construct(Dmc.bsc(alpha), k2, n, mode="shaping")
        uniform = JointSource.from_factored(0.5, ch)
        boot = P2PFromSw(
            SlepianWolf.for_joint(uniform, n, gamma_sym, tag=tag + ".sym"),
            tag=tag + ".boot")
        with np.errstate(divide="ignore"):
            table = np.log(joint.pxy[0]) - np.log(joint.pxy[1])
            table_sym = np.log(ch.p[0]) - np.log(ch.p[1])
        return cls(sw, shaper, boot, alpha, b,
                   np.clip(table, -LLR_CLAMP, LLR_CLAMP),
                   np.clip(table_sym, -LLR_CLAMP, LLR_CLAMP), tag=tag,
                   use_dither=use_dither, use_permutation=use_permutation)

    @property
    def rate(self) -> float:
        n, b = self.n, self.b
        return ((b - 1) * (self.k1 - self.k2) + n - self.k1) / (n * b)

    @property
    def message_dims(self) -> list:
        """Message length per block (block 1 carries none)."""
        mid = [self.k1 - self.k2] * (self.b - 2)
        return [0] + mid + [self.n - self.k2]

    def _block(self, j: int, stream: DitherStream) -> DitherStream:
        return stream.child(f"{self.tag}.blk{j}")

    def _dither(self, j: int, batch: int, stream: DitherStream) -> np.ndarray:
        if not self.use_dither:
            return np.zeros((batch, self.n), dtype=np.uint8)
        return self._block(j, stream).child("v").bits((batch, self.n))

    def _perm(self, j: int, stream: DitherStream) -> np.ndarray:
        if not self.use_permutation:
            return np.arange(self.n)
        return self._block(j, stream).child("perm").permutation(self.n)

    def encode(self, msgs: list, stream: DitherStream) -> list:
        """Channel inputs for blocks 1..b; ``msgs`` holds the messages of
        blocks 2..b (the last entry is the longer block-b message)."""
        if len(msgs) != self.b - 1:
            raise SchemeError("expected one message per block after the first")
        n, b = self.n, self.b
        packed = np.atleast_2d(np.asarray(msgs[-1], dtype=np.uint8))
        batch = packed.shape[0]
        xs = [None] * b
        for j in range(b, 1, -1):
            v = self._dither(j, batch, stream)
            a = coset_rep(self.shaper, packed) ^ v
            llr = (1.0 - 2.0 * a) * _llr_const(self.alpha)
            cw = pb.sc_shape_batch(self.shaper, llr,
                                   self._block(j, stream).child("shape").rng)
            xs[j - 1] = (cw ^ a)[:, self._perm(j, stream)]
            t1 = u_syndrome(self.sw.brick, xs[j - 1])
            if j > 2:
                packed = np.concatenate([t1, msgs[j - 3]], axis=1)
        boot_msg = np.zeros((batch, self.bootstrap.sw.k), dtype=np.uint8)
        boot_msg[:, : n - self.k1] = t1
        xs[0] = self.bootstrap.encode(boot_msg, stream)
        return xs

    def decode(self, ys: list, stream: DitherStream) -> list:
        """Message estimates for blocks 2..b from per-block channel outputs."""
        batch = np.atleast_2d(ys[0]).shape[0]
        boot_msg = self.bootstrap.decode(
            self.llr_table_sym[np.asarray(ys[0], dtype=np.int64)], stream)
        t1 = boot_msg[:, : self.n - self.k1]
        out = []
        for j in range(2, self.b + 1):
            sub = self._block(j, stream)
            llr = self.llr_table[np.asarray(ys[j - 1], dtype=np.int64)]
            x_hat = self.sw.decode(t1, llr, sub)
            xt = x_hat[:, np.argsort(self._perm(j, stream))]
            packed = (u_syndrome(self.shaper, xt)
                      ^ u_syndrome(self.shaper,
                                   self._dither(j, batch, stream)))
            if j < self.b:
                t1 = packed[:, : self.n - self.k1]
                out.append(packed[:, self.n - self.k1:])
            else:
                out.append(packed)
        return out


# ---------------------------------------------------------------------------
# lossy source-coding chain

class BmLossyChain:
    """Block-Markov lossy compressor for a Bern(theta) source at BSC(D)
    test-channel distortion.

    A shaping code for the symmetrized backward channel (with a joint-type
    spectrum near the matching multinomial) samples a reconstruction per
    block; a lossless code for Bern(alpha) conveys it. The lossless code's
    parity check splits into [P; Q]: the P-part of each block's index is
    folded into the next-encoded block's dither and the Q-part is sent. The
    first carried index is handed to the decoder out of band.
    """

    def __init__(self, shaper: pb.PolarBrick, carrier: pb.PolarBrick,
                 alpha: float, theta: float, d: float, b: int,
                 llr_table: np.ndarray, tag: str = "bml",
                 use_dither: bool = True, use_permutation: bool = True):
        if b < 2:
            raise SchemeError("need at least two blocks")
        if carrier.k >= shaper.k:
            raise SchemeError("carrier dimension must be below the shaping "
                              "dimension")
        self.shaper = shaper
        self.carrier = carrier
        self.alpha = alpha
        self.theta = theta
        self.d = d
        self.b = b
        self.n = shaper.n
        self.k1 = shaper.k
        self.k2 = carrier.k
        self.llr_table = llr_table  # symmetrized-pair labels 2x + z
        self.tag = tag
        self.use_dither = use_dither
        self.use_permutation = use_permutation

    @classmethod
    def build(cls, theta: float, d: float, n: int, b: int,
              gamma_shape: float, gamma_ll: float, tag: str = "bml",
              use_dither: bool = True, use_permutation: bool = True):
        joint = _lossy_joint(theta, d)  # rows reconstruction, cols source
        sym = symmetrize(joint)
        k1 = _dims(n, 1.0 - joint.cond_entropy() + gamma_shape)
        shaper = pb.construct(sym, k1, n, mode="shaping")
        alpha = float(joint.px()[1])
        k2 = _dims(n, 1.0 - hb(alpha) - gamma_ll)
        carrier = pb.construct(Dmc.bsc(alpha), k2, n)
        table = sym.llr(np.arange(sym.n_outputs))
        return cls(shaper, carrier, alpha, theta, d, b, table, tag=tag,
                   use_dither=use_dither, use_permutation=use_permutation)

    @property
    def rate(self) -> float:
        n, b = self.n, self.b
        return ((b - 1) * (self.k1 - self.k2) + n - self.k1) / ((b - 1) * n)

    def _block(self, j: int, stream: DitherStream) -> DitherStream:
        return stream.child(f"{self.tag}.blk{j}")

    def _dither(self, j: int, batch: int, stream: DitherStream) -> np.ndarray:
        if not self.use_dither:
            return np.zeros((batch, self.n), dtype=np.uint8)
        return self._block(j, stream).child("v").bits((batch, self.n))

    def _perm(self, j: int, stream: DitherStream) -> np.ndarray:
        if not self.use_permutation:
            return np.arange(self.n)
        return self._block(j, stream).child("perm").permutation(self.n)

    def encode(self, xs: list, stream: DitherStream):
        """Compress source blocks 2..b; returns (first carried index,
        per-block transmitted indices)."""
        if len(xs) != self.b - 1:
            raise SchemeError("expected b - 1 source blocks")
        n = self.n
        batch = np.atleast_2d(xs[-1]).shape[0]
        pu = np.zeros((batch, n - self.k1), dtype=np.uint8)
        msgs = [None] * (self.b - 1)
        for j in range(self.b, 1, -1):
            z = coset_rep(self.shaper, pu) ^ self._dither(j, batch, stream)
            perm = self._perm(j, stream)
            xt = np.atleast_2d(np.asarray(xs[j - 2],
                                          dtype=np.uint8))[:, np.argsort(perm)]
            obs = 2 * xt.astype(np.int64) + z
            cw = pb.sc_shape_batch(self.shaper, self.llr_table[obs],
                                   self._block(j, stream).child("shape").rng)
            u = (cw ^ z)[:, perm]
            syn = u_syndrome(self.carrier, u)
            pu = syn[:, : n - self.k1]
            msgs[j - 2] = syn[:, n - self.k1:]
        return pu, msgs

    def decode(self, pu_first: np.ndarray, msgs: list,
               stream: DitherStream) -> list:
        """Reconstructions of blocks 2..b from the first carried index and
        the per-block transmitted indices."""
        pu = np.atleast_2d(np.asarray(pu_first, dtype=np.uint8))
        batch = pu.shape[0]
        const = _llr_const(self.alpha)
        out = []
        for j in range(2, self.b + 1):
            sub = self._block(j, stream)
            packed = np.concatenate(
                [pu, np.atleast_2d(np.asarray(msgs[j - 2], dtype=np.uint8))],
                axis=1)
            w = sub.child("ll.v").bits((batch, self.n))
            a = coset_rep(self.carrier, packed) ^ uniform_cw(self.carrier, w)
            cw = pb.sc_decode_batch(self.carrier, (1.0 - 2.0 * a) * const)
            u = cw ^ a
            out.append(u)
            ut = u[:, np.argsort(self._perm(j, stream))]
            pu = (u_syndrome(self.shaper, ut)
                  ^ u_syndrome(self.shaper, self._dither(j, batch, stream)))
        return out
