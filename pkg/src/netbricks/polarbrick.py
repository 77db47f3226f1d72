"""Polar point-to-point bricks with successive-cancellation decoding.

A brick is a polar code in natural (non-bit-reversed) order: codewords are
x = u F^{tensor m} with F = [[1,0],[1,1]], frozen coordinates of u pinned to
zero. The same SC tree is used in two modes: hard decisions for error
correction and posterior sampling for shaping. Information sets come from
the standard Bhattacharyya-parameter upper-bound recursion, so construction
is deterministic for a given channel and block length.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .gf2core import BitMatrix, BitVector, NormalizedParityCheck, normalize
from .channels import LLR_CLAMP


class PolarError(Exception):
    pass


class InfeasibleNesting(PolarError):
    pass


def _bhattacharyya_seed(ch) -> float:
    """Initial Z for the bound recursion, for any supported channel object."""
    if hasattr(ch, "bhattacharyya"):
        return float(ch.bhattacharyya())
    if hasattr(ch, "sym_bhattacharyya"):
        return float(ch.sym_bhattacharyya())
    return float(ch)


def bhattacharyya_bounds(z0: float, n: int) -> np.ndarray:
    """Upper bounds on the synthetic-channel Bhattacharyya parameters.

    Index i corresponds to u_i of the natural-order transform: reading the
    bits of i from most significant to least, 0 applies the minus transform
    (Z <- 2Z - Z^2, an upper bound) and 1 the plus transform (Z <- Z^2).
    The most significant bit is the root split of the SC tree, so it is the
    transform applied first.
    """
    if n & (n - 1) or n <= 0:
        raise PolarError(f"block length must be a power of two, got {n}")
    zs = np.array([z0], dtype=np.float64)
    while zs.size < n:
        nxt = np.empty(2 * zs.size, dtype=np.float64)
        nxt[0::2] = 2.0 * zs - zs * zs
        nxt[1::2] = zs * zs
        zs = nxt
    return zs


def polar_transform(bits: np.ndarray) -> np.ndarray:
    """x = u F^{tensor m} on the last axis; involutive (its own inverse)."""
    bits = np.asarray(bits, dtype=np.uint8)
    n = bits.shape[-1]
    if n & (n - 1):
        raise PolarError("length must be a power of two")
    x = bits.reshape(-1, n).copy()
    h = 1
    while h < n:
        blk = x.reshape(-1, n // (2 * h), 2, h)
        blk[:, :, 0, :] ^= blk[:, :, 1, :]
        h *= 2
    return x.reshape(bits.shape)


class PolarBrick:
    """A polar code description: block length, information set, decode mode.

    Parameters
    ----------
    n : int
        Block length, a power of two.
    info_set : array_like
        Sorted indices (into the u-domain) carrying information bits.
    ch : object, optional
        Channel model the code was constructed for; used by the spectrum
        and error estimators.
    mode : {"hard", "shaping"}
        Default decode mode used by the estimators.
    """

    def __init__(self, n: int, info_set, ch=None, mode: str = "hard"):
        if n & (n - 1) or n <= 0:
            raise PolarError("block length must be a power of two")
        info = np.asarray(sorted(int(i) for i in info_set), dtype=np.int64)
        if info.size and (info[0] < 0 or info[-1] >= n):
            raise PolarError("information indices out of range")
        if len(set(info.tolist())) != info.size:
            raise PolarError("information indices must be distinct")
        if mode not in ("hard", "shaping"):
            raise PolarError(f"unknown decode mode {mode!r}")
        self.n = int(n)
        self.m = int(n).bit_length() - 1
        self.info_set = info
        self.k = int(info.size)
        self.ch = ch
        self.mode = mode
        mask = np.zeros(n, dtype=bool)
        mask[info] = True
        self.info_mask = mask
        self._pc = None

    def __repr__(self) -> str:
        return f"PolarBrick(n={self.n}, k={self.k}, mode={self.mode})"

    def encode_batch(self, msgs: np.ndarray) -> np.ndarray:
        """Codewords for message rows ``msgs`` of shape (batch, k)."""
        msgs = np.asarray(msgs, dtype=np.uint8)
        u = np.zeros((msgs.shape[0], self.n), dtype=np.uint8)
        u[:, self.info_set] = msgs
        return polar_transform(u)

    def message_of(self, cw: np.ndarray) -> np.ndarray:
        """Information bits of codeword rows (inverse of encode_batch)."""
        return polar_transform(cw)[..., self.info_set]


def construct(ch, k: int, n: int, mode: str = "hard") -> PolarBrick:
    """Build the n-length brick whose info set minimizes the Z-bounds."""
    if not 0 < k < n:
        raise PolarError(f"need 0 < k < n, got k={k}, n={n}")
    zs = bhattacharyya_bounds(_bhattacharyya_seed(ch), n)
    order = np.argsort(zs, kind="stable")
    return PolarBrick(n, np.sort(order[:k]), ch=ch, mode=mode)


def parity_check(brick: PolarBrick) -> NormalizedParityCheck:
    """Parity check whose null space is exactly the brick's codebook."""
    if brick._pc is None:
        if brick.k == brick.n:
            raise PolarError("rate-1 code has an empty parity check")
        t = polar_transform(np.eye(brick.n, dtype=np.uint8))
        frozen = np.nonzero(~brick.info_mask)[0]
        h = np.ascontiguousarray(t[:, frozen].T)
        brick._pc = normalize(BitMatrix.from_array(h))
    return brick._pc


def _boxplus(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact LLR combination log((1+e^{a+b})/(e^a+e^b)), numerically stable."""
    return (
        np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
        + np.log1p(np.exp(-np.abs(a + b)))
        - np.log1p(np.exp(-np.abs(a - b)))
    )


def _sc_rec(llr, base, out_u, decide):
    """One SC tree node; returns the node's partial codeword bits."""
    size = llr.shape[1]
    if size == 1:
        u = decide(base, llr[:, 0])
        out_u[:, base] = u
        return u[:, None]
    half = size // 2
    l1 = llr[:, :half]
    l2 = llr[:, half:]
    x_left = _sc_rec(_boxplus(l1, l2), base, out_u, decide)
    g = l2 + (1.0 - 2.0 * x_left) * l1
    x_right = _sc_rec(g, base + half, out_u, decide)
    return np.concatenate([x_left ^ x_right, x_right], axis=1)


_CHUNK_TRIALS = 4096


def _sc_run(brick: PolarBrick, llrs: np.ndarray, decide_info) -> np.ndarray:
    """Shared SC driver; ``decide_info`` maps (u_index, leaf llr) to bits."""
    llrs = np.clip(np.asarray(llrs, dtype=np.float64), -LLR_CLAMP, LLR_CLAMP)
    squeeze = llrs.ndim == 1
    if squeeze:
        llrs = llrs[None, :]
    if llrs.shape[1] != brick.n:
        raise PolarError("LLR length does not match the block length")
    mask = brick.info_mask

    def decide(idx, col):
        if not mask[idx]:
            return np.zeros(col.shape[0], dtype=np.uint8)
        return decide_info(idx, col)

    out = np.empty(llrs.shape, dtype=np.uint8)
    for i in range(0, llrs.shape[0], _CHUNK_TRIALS):
        blk = llrs[i : i + _CHUNK_TRIALS]
        u = np.empty(blk.shape, dtype=np.uint8)
        out[i : i + _CHUNK_TRIALS] = _sc_rec(blk.copy(), 0, u, decide)
    return out[0] if squeeze else out


def sc_decode_batch(brick: PolarBrick, llrs: np.ndarray) -> np.ndarray:
    """Hard SC decisions; ties (LLR exactly zero) resolve to bit 0."""
    return _sc_run(brick, llrs, lambda idx, col: (col < 0).astype(np.uint8))


def sc_shape_batch(brick: PolarBrick, llrs: np.ndarray, rng) -> np.ndarray:
    """SC pass sampling each information bit from its posterior.

    The uniform draws are generated up front, one per (trial, bit-channel),
    so the output is a deterministic function of (llrs, rng state).
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    squeeze = llrs.ndim == 1
    rows = 1 if squeeze else llrs.shape[0]
    clipped = np.clip(llrs.reshape(rows, brick.n), -LLR_CLAMP, LLR_CLAMP)
    unif = rng.random((rows, brick.n))
    mask = brick.info_mask
    out = np.empty((rows, brick.n), dtype=np.uint8)
    for i in range(0, rows, _CHUNK_TRIALS):
        blk = clipped[i : i + _CHUNK_TRIALS]
        ublk = unif[i : i + _CHUNK_TRIALS]

        def decide(idx, col, ublk=ublk):
            if not mask[idx]:
                return np.zeros(col.shape[0], dtype=np.uint8)
            # posterior P{bit=1} given llr = log p(obs|0)/p(obs|1) under a
            # uniform prior is the logistic of -llr
            return (ublk[:, idx] < expit(-col)).astype(np.uint8)

        u = np.empty(blk.shape, dtype=np.uint8)
        out[i : i + _CHUNK_TRIALS] = _sc_rec(blk.copy(), 0, u, decide)
    return out[0] if squeeze else out


def sc_decode(brick: PolarBrick, llrs) -> BitVector:
    """Single-shot hard SC decode returning the codeword."""
    return BitVector.from_array(sc_decode_batch(brick, np.asarray(llrs)))


def sc_shape(brick: PolarBrick, llrs, rng) -> BitVector:
    """Single-shot shaping decode returning the sampled codeword."""
    return BitVector.from_array(sc_shape_batch(brick, np.asarray(llrs), rng))


class NestedPair:
    """Two polar bricks with nested codebooks sharing one block length.

    The inner information set is a subset of the outer one, so every inner
    codeword satisfies the outer parity check. ``q`` collects the rows of
    the transform that freeze the outer-only information positions: the
    inner parity check is the stack [outer H; q].
    """

    def __init__(self, outer: PolarBrick, inner: PolarBrick, q: BitMatrix):
        self.outer = outer
        self.inner = inner
        self.q = q
        self.n = outer.n
        # u-domain indices carrying the extra syndrome bits, sorted
        self.extra = np.setdiff1d(outer.info_set, inner.info_set)
        self.k1 = len(outer.info_set)
        self.k2 = len(inner.info_set)

    def coset_message_batch(self, cw: np.ndarray) -> np.ndarray:
        """q @ x for codeword rows ``cw``; the k1-k2 coset coordinates."""
        return polar_transform(cw)[..., self.extra]


def nested(ch_outer, ch_inner, k1: int, k2: int, n: int,
           mode_outer: str = "hard", mode_inner: str = "hard") -> NestedPair:
    """Construct nested bricks: inner info set = k2 best outer indices."""
    if not 0 <= k2 < k1:
        raise InfeasibleNesting(f"need 0 <= k2 < k1, got k1={k1}, k2={k2}")
    outer = construct(ch_outer, k1, n, mode=mode_outer)
    zs = bhattacharyya_bounds(_bhattacharyya_seed(ch_inner), n)
    ranked = sorted(outer.info_set.tolist(), key=lambda i: (zs[i], i))
    inner = PolarBrick(n, sorted(ranked[:k2]), ch=ch_inner, mode=mode_inner)
    extra = np.setdiff1d(outer.info_set, inner.info_set)
    t = polar_transform(np.eye(n, dtype=np.uint8))
    q = BitMatrix.from_array(np.ascontiguousarray(t[:, extra].T))
    return NestedPair(outer, inner, q)


# ---------------------------------------------------------------------------
# Monte-Carlo property estimators

def wilson_interval(errors: int, trials: int, z: float = 1.96):
    """95% Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise PolarError("trials must be positive")
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return max(0.0, center - half), min(1.0, center + half)


def estimate_error_prob(brick: PolarBrick, ch, trials: int, rng,
                        batch: int = 4096):
    """Monte-Carlo block-error rate of hard SC over random codewords.

    Returns (estimate, (ci_lo, ci_hi)) with a 95% Wilson interval.
    """
    if trials < 1:
        raise PolarError("trials must be >= 1")
    errors = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        msgs = rng.integers(0, 2, size=(b, brick.k), dtype=np.uint8)
        cw = brick.encode_batch(msgs)
        y = ch.sample(cw, rng)
        llr = ch.llr(y)
        dec = sc_decode_batch(brick, llr)
        errors += int((dec != cw).any(axis=1).sum())
        done += b
    return errors / trials, wilson_interval(errors, trials)


def _decode_binary_obs(brick: PolarBrick, ch, obs: np.ndarray, rng):
    """Decode rows of a binary observation through the brick's mode."""
    llr0 = float(ch.llr(np.array([0]))[0])
    llr1 = float(ch.llr(np.array([1]))[0])
    llrs = np.where(obs == 0, llr0, llr1)
    if brick.mode == "shaping":
        return sc_shape_batch(brick, llrs, rng)
    return sc_decode_batch(brick, llrs)


def estimate_w_spectrum(brick: PolarBrick, trials: int, rng, ch=None,
                        batch: int = 4096) -> np.ndarray:
    """Histogram (length n+1) of d_H(V, decode(V)) over uniform V.

    ``ch`` defaults to the brick's construction channel and must be a
    binary-input binary-output model supplying per-symbol LLRs.
    """
    if trials < 1:
        raise PolarError("trials must be >= 1")
    ch = ch if ch is not None else brick.ch
    counts = np.zeros(brick.n + 1, dtype=np.int64)
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        v = rng.integers(0, 2, size=(b, brick.n), dtype=np.uint8)
        dec = _decode_binary_obs(brick, ch, v, rng)
        w = (v ^ dec).sum(axis=1)
        counts += np.bincount(w, minlength=brick.n + 1)
        done += b
    return counts


def estimate_t_spectrum(brick: PolarBrick, ch, trials: int, rng,
                        batch: int = 4096) -> np.ndarray:
    """Sampled joint types of (decode(Y), Y) with Y i.i.d. from p(y).

    ``ch`` is a discrete memoryless model; p(y) is its output law under a
    uniform input. Returns an array of shape (trials, 2, L) whose rows are
    per-trial counts of each (input-estimate, output-symbol) pair.
    """
    if trials < 1:
        raise PolarError("trials must be >= 1")
    py = ch.p.mean(axis=0)
    n_out = py.size
    out = np.empty((trials, 2, n_out), dtype=np.int64)
    llr_table = ch.llr(np.arange(n_out))
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        y = rng.choice(n_out, size=(b, brick.n), p=py)
        llrs = llr_table[y]
        if brick.mode == "shaping":
            x = sc_shape_batch(brick, llrs, rng)
        else:
            x = sc_decode_batch(brick, llrs)
        flat = (x.astype(np.int64) * n_out + y).reshape(b, -1)
        for j in range(b):
            out[done + j] = np.bincount(
                flat[j], minlength=2 * n_out
            ).reshape(2, n_out)
        done += b
    return out
