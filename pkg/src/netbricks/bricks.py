"""Brick interfaces and exact small-scale property evaluators.

The two primitive properties a point-to-point brick contributes to a larger
construction are its block-error probability and its shaping distance.
Both are defined as sums over exponentially large alphabets, so the exact
evaluators here enumerate them outright and refuse instances beyond a fixed
state budget. They serve as desk-scale oracles for the Monte-Carlo
estimators and as machine checks of the coset-law identities the network
schemes rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import polarbrick as pb
from .channels import Dmc, JointSource
from .gf2core import NormalizedParityCheck, coset_shift_batch

MAX_EXACT_STATES = 1 << 24


class TooLargeForExact(Exception):
    pass


def _check_budget(states: float):
    if states > MAX_EXACT_STATES:
        raise TooLargeForExact(f"{states:.3g} states exceed {MAX_EXACT_STATES}")


def all_bit_rows(n: int) -> np.ndarray:
    """All 2^n binary rows of length n, lexicographic, MSB first."""
    _check_budget(float(n) * 2.0**n)
    idx = np.arange(1 << n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.uint8)


def all_label_rows(n_labels: int, n: int) -> np.ndarray:
    """All label sequences of length n over {0..n_labels-1}."""
    total = float(n_labels) ** n
    _check_budget(total * n)
    idx = np.arange(int(n_labels**n), dtype=np.int64)
    out = np.empty((idx.size, n), dtype=np.int64)
    for j in range(n - 1, -1, -1):
        out[:, j] = idx % n_labels
        idx = idx // n_labels
    return out


class BrickP2P:
    """A (k, n) point-to-point channel code with an attached decoder.

    Two flavours cover everything the exact evaluators need: a polar brick
    decoded by SC (hard or posterior-sampling mode) and an explicit
    codebook decoded by MAP with deterministic lexicographic tie-breaking.
    """

    def __init__(self, n: int, k: int, polar: pb.PolarBrick = None,
                 codebook: np.ndarray = None, mode: str = "hard"):
        self.n = int(n)
        self.k = int(k)
        self.rate = k / n
        self.polar = polar
        self._codebook = codebook
        self.mode = mode

    @classmethod
    def from_polar(cls, brick: pb.PolarBrick) -> "BrickP2P":
        return cls(brick.n, brick.k, polar=brick, mode=brick.mode)

    @classmethod
    def from_codebook(cls, codebook: np.ndarray) -> "BrickP2P":
        codebook = np.asarray(codebook, dtype=np.uint8)
        size = codebook.shape[0]
        if size & (size - 1):
            raise ValueError("codebook size must be a power of two")
        return cls(codebook.shape[1], size.bit_length() - 1, codebook=codebook)

    def codebook(self) -> np.ndarray:
        if self._codebook is None:
            msgs = all_bit_rows(self.k) if self.k else np.zeros((1, 0), dtype=np.uint8)
            self._codebook = self.polar.encode_batch(msgs)
        return self._codebook

    def decode_batch(self, llrs: np.ndarray, rng=None) -> np.ndarray:
        """Decode rows of per-symbol LLRs log p(obs|0)/p(obs|1)."""
        llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
        if self.polar is not None:
            if self.mode == "shaping":
                if rng is None:
                    raise ValueError("shaping mode needs an rng")
                return pb.sc_shape_batch(self.polar, llrs, rng)
            return pb.sc_decode_batch(self.polar, llrs)
        # MAP over the explicit codebook: maximize sum of (1-2c)*llr/2,
        # equivalently minimize <c, llr>; ties go to the earliest codeword
        cb = self.codebook()
        scores = llrs @ cb.T.astype(np.float64)
        return cb[np.argmax(-scores, axis=1)]

    def decode_dists(self, llrs: np.ndarray) -> np.ndarray:
        """Exact decoder output law: rows of P{decode = codebook[j]}.

        Deterministic decoders give one-hot rows. The posterior-sampling SC
        decoder's law is computed by forcing every information-bit path and
        accumulating the product of per-bit posteriors.
        """
        llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
        n_obs = llrs.shape[0]
        size = 1 << self.k
        _check_budget(float(n_obs) * size * self.n)
        if self.polar is None or self.mode == "hard":
            dec = self.decode_batch(llrs)
            cb = self.codebook()
            idx = {tuple(c): j for j, c in enumerate(cb)}
            out = np.zeros((n_obs, size))
            for i, d in enumerate(dec):
                out[i, idx[tuple(d)]] = 1.0
            return out
        return _sc_shape_dists(self.polar, llrs)


def _sc_shape_dists(brick: pb.PolarBrick, llrs: np.ndarray) -> np.ndarray:
    """Exact output law of posterior-sampling SC, by path enumeration.

    For each observation, every assignment of the k information bits is run
    through the SC recursion as a forced path; the path probability is the
    product of the per-bit posteriors actually sampled from.
    """
    msgs = all_bit_rows(brick.k) if brick.k else np.zeros((1, 0), dtype=np.uint8)
    size = msgs.shape[0]
    forced = np.zeros((size, brick.n), dtype=np.uint8)
    forced[:, brick.info_set] = msgs
    out = np.empty((llrs.shape[0], size))
    from .channels import LLR_CLAMP

    for i in range(llrs.shape[0]):
        tiled = np.clip(np.tile(llrs[i], (size, 1)), -LLR_CLAMP, LLR_CLAMP)
        prob = np.ones(size)
        mask = brick.info_mask

        def decide(idx, col):
            if not mask[idx]:
                return np.zeros(size, dtype=np.uint8)
            p1 = expit(-col)
            bits = forced[:, idx]
            prob[:] *= np.where(bits == 1, p1, 1.0 - p1)
            return bits

        u = np.empty((size, brick.n), dtype=np.uint8)
        pb._sc_rec(tiled, 0, u, decide)
        out[i] = prob
    return out


def exact_error_prob(b: BrickP2P, ch: Dmc, rng=None) -> float:
    """Average block-error probability by full output enumeration.

    epsilon = sum_c 2^{-k} P{decode(Y) != c | X = c}.
    """
    n_out = ch.n_outputs
    _check_budget(float(n_out) ** b.n * (1 << b.k))
    ys = all_label_rows(n_out, b.n)
    llr_table = ch.llr(np.arange(n_out))
    dists = b.decode_dists(llr_table[ys])
    cb = b.codebook()
    # P(y | c) for every codeword and output sequence
    log_p = np.log(np.maximum(ch.p, 1e-300))
    loglik = np.array([log_p[c][np.arange(b.n), ys].sum(axis=1) for c in cb])
    lik = np.exp(loglik)  # (2^k, L^n)
    correct = (lik * dists.T).sum(axis=1)  # P{decode = c | X = c}
    return float(1.0 - correct.mean())


def exact_shaping_distance(b: BrickP2P, ch: Dmc) -> float:
    """Exact TV between the decoder-induced joint and i.i.d. 2^{-n} p(y|x).

    Y^n is i.i.d. from the uniform-input output law p(y); X^n = decode(Y^n).
    """
    n_out = ch.n_outputs
    _check_budget(float(n_out) ** b.n * (1 << b.k) * 2.0**b.n)
    ys = all_label_rows(n_out, b.n)
    py = ch.p.mean(axis=0)
    p_seq = np.prod(py[ys], axis=1)  # (L^n,)
    llr_table = ch.llr(np.arange(n_out))
    dists = b.decode_dists(llr_table[ys])  # (L^n, 2^k)
    cb = b.codebook()
    xs = all_bit_rows(b.n)
    # q(x^n, y^n): decoder mass lives only on the codebook
    q = np.zeros((xs.shape[0], ys.shape[0]))
    cw_index = (cb.astype(np.int64) @ (1 << np.arange(b.n - 1, -1, -1))).astype(np.int64)
    q[cw_index] = (p_seq[:, None] * dists).T
    # target: 2^{-n} prod p(y_i | x_i)
    target = np.empty_like(q)
    for i, x in enumerate(xs):
        target[i] = np.prod(ch.p[x][np.arange(b.n), ys], axis=1) * 2.0**-b.n
    return float(0.5 * np.abs(q - target).sum())


def check_lemma2_exact(pc: NormalizedParityCheck, joint: JointSource) -> float:
    """Machine check of the coset product law at desk scale.

    For X^n i.i.d. p(x), V^n uniform, C = X + V + Ht X + Ht V and
    U = V + Ht V + Ht X (arithmetic over GF(2)), the claim is
    P{C = c, U = u, Y = y} = 2^{-k} prod p-bar(y_i, u_i | c_i). The law
    of (C, U) is enumerated exactly; both sides share the channel factor
    prod p(y_i | x_i) because x = c + u holds pathwise (asserted), so the
    maximum deviation over (c, u, y) is the (C, U)-law deviation scaled by
    the largest channel factor.
    """
    n = pc.n
    _check_budget(4.0 ** n)
    xs = all_bit_rows(n)
    vs = all_bit_rows(n)
    px = joint.px()
    px_seq = np.prod(np.where(xs == 1, px[1], px[0]), axis=1)
    hx = coset_shift_batch(pc, xs)
    hv = coset_shift_batch(pc, vs)
    pow2 = (1 << np.arange(n - 1, -1, -1)).astype(np.int64)
    law = np.zeros((1 << n, 1 << n))
    for i, x in enumerate(xs):
        c = x ^ vs ^ hx[i] ^ hv
        u = vs ^ hv ^ hx[i]
        assert np.array_equal(c ^ u, np.tile(x, (vs.shape[0], 1)))
        np.add.at(law, (c @ pow2, u @ pow2), px_seq[i] * 2.0**-n)
    # claimed (C, U) marginal: summing the product over y gives
    # 2^{-k} prod p_X((c + u)_i) supported on codewords c (the product
    # p-bar form already carries the 2^{-k} uniform-codeword factor)
    is_codeword = ~coset_shift_batch(pc, xs).any(axis=1)
    ci = np.repeat(np.arange(1 << n), 1 << n)
    ui = np.tile(np.arange(1 << n), 1 << n)
    xi = ci ^ ui
    x_bits = ((xi[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.uint8)
    weight = x_bits.sum(axis=1)
    claimed = (np.prod(np.where(x_bits == 1, px[1], px[0]), axis=1)
               * 2.0**-pc.k).reshape(1 << n, 1 << n)
    claimed[~is_codeword] = 0.0
    dev_cu = np.abs(law - claimed).ravel()
    # both sides carry the identical factor prod p(y_i | x_i); its maximum
    # over y^n depends only on the weight of x = c + u
    cond = joint.pxy / np.maximum(px[:, None], 1e-300)
    f0, f1 = float(cond[0].max()), float(cond[1].max())
    factor = f0 ** (n - weight) * f1**weight
    return float((dev_cu * factor).max())


# ---------------------------------------------------------------------------
# brick records used by the network schemes: each carries its constituent
# codes plus the rate bookkeeping the rate-formula assertions check against

@dataclass
class BrickSlepianWolf:
    """(n-k, n) syndrome code for a joint source p(x, y)."""
    n: int
    k: int
    polar: pb.PolarBrick
    joint: object

    @property
    def rate(self) -> float:
        return (self.n - self.k) / self.n


@dataclass
class BrickLossless:
    """Lossless source code for a Bernoulli source, rate (n-k)/n."""
    n: int
    k: int
    polar: pb.PolarBrick
    theta: float

    @property
    def rate(self) -> float:
        return (self.n - self.k) / self.n


@dataclass
class BrickLossy:
    """Nested pair for lossy coding of a uniform or asymmetric source."""
    n: int
    pair: pb.NestedPair
    target_d: float
    alpha: float

    @property
    def rate(self) -> float:
        return (self.pair.outer.k - self.pair.inner.k) / self.n


@dataclass
class BrickWZ:
    """Nested pair whose inner code is a Slepian-Wolf code (side info)."""
    n: int
    pair: pb.NestedPair
    target_d: float

    @property
    def rate(self) -> float:
        return (self.pair.outer.k - self.pair.inner.k) / self.n


@dataclass
class BrickGP:
    """Nested SW/shaping pair for channels with encoder-side state."""
    n: int
    pair: pb.NestedPair

    @property
    def rate(self) -> float:
        return (self.pair.outer.k - self.pair.inner.k) / self.n


@dataclass
class BrickAsym:
    """Asymmetric-channel code: a state-free special case of BrickGP."""
    n: int
    pair: pb.NestedPair
    alpha: float

    @property
    def rate(self) -> float:
        return (self.pair.outer.k - self.pair.inner.k) / self.n
