"""Exact GF(2) linear algebra and coset machinery.

Vectors and matrices are stored as packed 64-bit words (little-endian bit
order within a word, explicit tail masking). All elimination routines use
deterministic leftmost-pivot tie-breaking so normal forms are reproducible
across runs. Objects are immutable after construction.
"""

from __future__ import annotations

import numpy as np


class GF2Error(Exception):
    pass


class DimensionMismatch(GF2Error):
    pass


class RankDeficient(GF2Error):
    pass


class NotACodeword(GF2Error):
    pass


_WORD = 64


def _n_words(nbits: int) -> int:
    return (nbits + _WORD - 1) // _WORD


def _pack(bits: np.ndarray) -> np.ndarray:
    """Pack a 0/1 array (last axis = bits) into uint64 words."""
    bits = np.asarray(bits, dtype=np.uint8)
    nbits = bits.shape[-1]
    pad = _n_words(nbits) * _WORD - nbits
    if pad:
        pad_shape = bits.shape[:-1] + (pad,)
        bits = np.concatenate([bits, np.zeros(pad_shape, dtype=np.uint8)], axis=-1)
    # np.packbits is big-endian within bytes; ask for little-endian so that
    # bit j of the vector lands at bit j%8 of byte j//8.
    packed = np.ascontiguousarray(np.packbits(bits, axis=-1, bitorder="little"))
    return packed.view(np.uint64).reshape(bits.shape[:-1] + (-1,))


def _unpack(words: np.ndarray, nbits: int) -> np.ndarray:
    body = np.unpackbits(words.view(np.uint8), axis=-1, bitorder="little")
    return body[..., :nbits]


class BitVector:
    """Immutable GF(2) vector of length ``len`` packed into uint64 words."""

    __slots__ = ("len", "words")

    def __init__(self, length: int, words: np.ndarray):
        if length <= 0:
            raise DimensionMismatch(f"vector length must be positive, got {length}")
        self.len = int(length)
        w = np.ascontiguousarray(words, dtype=np.uint64)
        if w.shape != (_n_words(length),):
            raise DimensionMismatch("word buffer has wrong shape")
        # mask bits beyond len
        tail = length % _WORD
        if tail:
            w = w.copy()
            w[-1] &= np.uint64((1 << tail) - 1)
        w.setflags(write=False)
        self.words = w

    @classmethod
    def from_array(cls, bits) -> "BitVector":
        bits = np.asarray(bits, dtype=np.uint8) & 1
        if bits.ndim != 1:
            raise DimensionMismatch("expected a 1-D bit array")
        return cls(bits.shape[0], _pack(bits))

    @classmethod
    def zeros(cls, length: int) -> "BitVector":
        return cls(length, np.zeros(_n_words(length), dtype=np.uint64))

    def to_array(self) -> np.ndarray:
        return _unpack(self.words, self.len)

    def __xor__(self, other: "BitVector") -> "BitVector":
        if self.len != other.len:
            raise DimensionMismatch("xor of vectors with different lengths")
        return BitVector(self.len, self.words ^ other.words)

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.len:
            raise IndexError(i)
        return int((self.words[i // _WORD] >> np.uint64(i % _WORD)) & np.uint64(1))

    def weight(self) -> int:
        return int(np.bitwise_count(self.words).sum())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitVector)
            and self.len == other.len
            and bool(np.array_equal(self.words, other.words))
        )

    def __hash__(self) -> int:
        return hash((self.len, self.words.tobytes()))

    def __repr__(self) -> str:
        s = "".join(str(b) for b in self.to_array())
        return f"BitVector({s})"


class BitMatrix:
    """Immutable row-major GF(2) matrix packed into uint64 words per row."""

    __slots__ = ("rows", "cols", "words")

    def __init__(self, rows: int, cols: int, words: np.ndarray):
        if rows <= 0 or cols <= 0:
            raise DimensionMismatch("matrix dimensions must be positive")
        self.rows = int(rows)
        self.cols = int(cols)
        w = np.ascontiguousarray(words, dtype=np.uint64)
        if w.shape != (rows, _n_words(cols)):
            raise DimensionMismatch("word buffer has wrong shape")
        tail = cols % _WORD
        if tail:
            w = w.copy()
            w[:, -1] &= np.uint64((1 << tail) - 1)
        w.setflags(write=False)
        self.words = w

    @classmethod
    def from_array(cls, bits) -> "BitMatrix":
        bits = np.asarray(bits, dtype=np.uint8) & 1
        if bits.ndim != 2:
            raise DimensionMismatch("expected a 2-D bit array")
        return cls(bits.shape[0], bits.shape[1], _pack(bits))

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls.from_array(np.eye(n, dtype=np.uint8))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(rows, cols, np.zeros((rows, _n_words(cols)), dtype=np.uint64))

    def to_array(self) -> np.ndarray:
        return _unpack(self.words, self.cols)

    def row(self, i: int) -> BitVector:
        if not 0 <= i < self.rows:
            raise IndexError(i)
        return BitVector(self.cols, self.words[i])

    def __getitem__(self, ij) -> int:
        i, j = ij
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(ij)
        return int((self.words[i, j // _WORD] >> np.uint64(j % _WORD)) & np.uint64(1))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitMatrix)
            and (self.rows, self.cols) == (other.rows, other.cols)
            and bool(np.array_equal(self.words, other.words))
        )

    def __hash__(self) -> int:
        return hash((self.rows, self.cols, self.words.tobytes()))

    def __repr__(self) -> str:
        return f"BitMatrix({self.rows}x{self.cols})"

    def serialize(self) -> str:
        """Text form: first line "rows cols", then rows as 0/1 strings."""
        lines = [f"{self.rows} {self.cols}"]
        for r in self.to_array():
            lines.append("".join(str(b) for b in r))
        return "\n".join(lines) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "BitMatrix":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        rows, cols = (int(t) for t in lines[0].split())
        if len(lines) - 1 != rows:
            raise DimensionMismatch("row count does not match header")
        arr = np.zeros((rows, cols), dtype=np.uint8)
        for i, ln in enumerate(lines[1:]):
            if len(ln.strip()) != cols:
                raise DimensionMismatch(f"row {i} has wrong length")
            arr[i] = [int(c) for c in ln.strip()]
        return cls.from_array(arr)


def mat_vec(m: BitMatrix, x: BitVector) -> BitVector:
    """GF(2) matrix-vector product m @ x."""
    if m.cols != x.len:
        raise DimensionMismatch(f"{m.cols} columns vs vector of length {x.len}")
    acc = np.bitwise_count(m.words & x.words[None, :]).sum(axis=1) & 1
    return BitVector.from_array(acc.astype(np.uint8))


def mat_vec_batch(m: BitMatrix, xs: np.ndarray) -> np.ndarray:
    """m @ x for a batch of unpacked 0/1 rows ``xs`` of shape (batch, cols).

    Work is chunked over the batch axis so the intermediate popcount buffer
    stays bounded regardless of trial count.
    """
    xs = np.asarray(xs, dtype=np.uint8)
    if xs.ndim != 2 or xs.shape[-1] != m.cols:
        raise DimensionMismatch("batch column count mismatch")
    packed = _pack(xs)
    n_words = m.words.shape[1]
    out = np.empty((xs.shape[0], m.rows), dtype=np.uint8)
    chunk = max(1, (1 << 24) // max(1, m.rows * n_words))
    for i in range(0, xs.shape[0], chunk):
        blk = packed[i : i + chunk]
        acc = np.bitwise_count(blk[:, None, :] & m.words[None, :, :])
        out[i : i + chunk] = (acc.sum(axis=2, dtype=np.uint32) & 1).astype(np.uint8)
    return out


def mat_mul(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    """GF(2) matrix product a @ b."""
    if a.cols != b.rows:
        raise DimensionMismatch("inner dimensions differ")
    out = mat_vec_batch(a, b.to_array().T).T
    return BitMatrix.from_array(out)


def stack(*mats: BitMatrix) -> BitMatrix:
    """Vertical stack; all blocks must have equal column counts."""
    if not mats:
        raise DimensionMismatch("stack of nothing")
    cols = mats[0].cols
    for m in mats:
        if m.cols != cols:
            raise DimensionMismatch("stack requires equal column counts")
    words = np.concatenate([m.words for m in mats], axis=0)
    return BitMatrix(sum(m.rows for m in mats), cols, words)


def _eliminate_packed(words: np.ndarray, col_order) -> list:
    """Row-reduce a writable packed (rows, W) uint64 array in place.

    ``col_order`` is the sequence of candidate pivot columns. Within each
    column the topmost unused row wins (deterministic tie-breaking), and the
    column is cleared in every other row. Returns the pivot columns in the
    order they were claimed.
    """
    rows = words.shape[0]
    pivots = []
    r = 0
    one = np.uint64(1)
    for c in col_order:
        if r == rows:
            break
        w, b = c >> 6, np.uint64(c & 63)
        hot = np.nonzero((words[r:, w] >> b) & one)[0]
        if hot.size == 0:
            continue
        top = r + int(hot[0])
        if top != r:
            words[[r, top]] = words[[top, r]]
        col = (words[:, w] >> b) & one
        col[r] = 0
        others = np.nonzero(col)[0]
        if others.size:
            words[others] ^= words[r]
        pivots.append(c)
        r += 1
    return pivots


def _eliminate(arr: np.ndarray):
    """Row-reduce a 0/1 array in place. Returns the list of pivot columns."""
    rows, cols = arr.shape
    words = _pack(arr)
    pivots = _eliminate_packed(words, range(cols))
    arr[:] = _unpack(words, cols)
    return pivots


def rank(m: BitMatrix) -> int:
    words = m.words.copy()
    return len(_eliminate_packed(words, range(m.cols)))


def _invert(arr: np.ndarray) -> np.ndarray:
    """Invert a square 0/1 matrix over GF(2); raises RankDeficient."""
    n = arr.shape[0]
    aug = _pack(np.concatenate([arr.astype(np.uint8), np.eye(n, dtype=np.uint8)], axis=1))
    pivots = _eliminate_packed(aug, range(n))
    if pivots != list(range(n)):
        raise RankDeficient("matrix is singular")
    return _unpack(aug, 2 * n)[:, n:]


class NormalizedParityCheck:
    """A full-row-rank parity check in normal form H = [A B], B invertible.

    ``h`` lives in the permuted coordinate system: column i of ``h`` is
    column ``col_perm[i]`` of the matrix handed to :func:`normalize`. All
    derived objects (``h_tilde``, ``gen``) and the plain coset operations
    work in these permuted coordinates. The ``*_orig`` helpers map to and
    from the original column order so callers holding channel-frame
    sequences never need to track the permutation themselves; ``info_cols``
    records the original-column indices of the k information positions.
    """

    __slots__ = ("h", "col_perm", "b_inv", "h_tilde", "gen", "info_cols", "n", "k",
                 "_gen_right", "_h_tilde_low_mat", "_syn_cols")

    def __init__(self, h: BitMatrix, col_perm: np.ndarray, b_inv: BitMatrix,
                 h_tilde: BitMatrix, gen: BitMatrix, info_cols: np.ndarray):
        self.h = h
        self.col_perm = col_perm
        self.b_inv = b_inv
        self.h_tilde = h_tilde
        self.gen = gen
        self.info_cols = info_cols
        self.n = h.cols
        self.k = h.cols - h.rows
        # cached blocks for batch operations
        self._gen_right = None
        self._h_tilde_low_mat = None
        self._syn_cols = None

    # -- original-frame helpers -------------------------------------------

    def syndrome_batch(self, xs: np.ndarray) -> np.ndarray:
        """Raw syndromes H x for rows ``xs`` given in the original frame."""
        xs = np.asarray(xs, dtype=np.uint8)
        if xs.shape[-1] != self.n:
            raise DimensionMismatch("sequence length mismatch")
        return mat_vec_batch(self.h, xs[:, self.col_perm])

    def shift_from_syndrome_batch(self, ts: np.ndarray) -> np.ndarray:
        """Original-frame coset shifts with raw syndromes ``ts``.

        Each output row is zero on the k information coordinates and has
        syndrome equal to the corresponding row of ``ts``.
        """
        ts = np.asarray(ts, dtype=np.uint8)
        if ts.shape[-1] != self.n - self.k:
            raise DimensionMismatch("syndrome length mismatch")
        low = mat_vec_batch(self.b_inv, ts)
        out = np.zeros((ts.shape[0], self.n), dtype=np.uint8)
        if self._syn_cols is None:
            self._syn_cols = np.ascontiguousarray(self.col_perm[self.k:])
        out[:, self._syn_cols] = low
        return out

    def shift_orig_batch(self, xs: np.ndarray) -> np.ndarray:
        """Original-frame coset shift of each row of ``xs``."""
        return self.shift_from_syndrome_batch(self.syndrome_batch(xs))

    def encode_orig_batch(self, us: np.ndarray) -> np.ndarray:
        """Codewords in the original frame with information bits ``us``."""
        c_perm = encode_batch(self, us)
        out = np.empty_like(c_perm)
        out[:, self.col_perm] = c_perm
        return out

    def info_bits_batch(self, cs: np.ndarray) -> np.ndarray:
        """Information bits of original-frame codewords (no membership check)."""
        cs = np.asarray(cs, dtype=np.uint8)
        return cs[:, self.info_cols]


def normalize(h_raw: BitMatrix) -> NormalizedParityCheck:
    """Bring a full-row-rank parity check to normal form.

    If the last n-k columns of ``h_raw`` are already linearly independent the
    column permutation is the identity. Otherwise pivot columns are chosen
    greedily from the right (moving the fewest columns) and the permutation
    is recorded. A single elimination pass scanning columns right-to-left
    yields both the rank check and the greedy pivot set.
    """
    arr = h_raw.to_array()
    r, n = arr.shape
    k = n - r

    probe = h_raw.words.copy()
    pivots = sorted(_eliminate_packed(probe, range(n - 1, -1, -1)))
    if len(pivots) != r:
        raise RankDeficient("parity check does not have full row rank")

    if pivots == list(range(k, n)):
        perm = np.arange(n)
    else:
        keep = set(pivots)
        rest = [c for c in range(n) if c not in keep]
        perm = np.array(rest + pivots, dtype=np.int64)
        arr = arr[:, perm]

    # Reduce [H_perm | I_r] pivoting on the tail columns only: the left block
    # becomes B^-1 H (identity on its last r columns) and the right block B^-1.
    aug = _pack(np.concatenate([arr, np.eye(r, dtype=np.uint8)], axis=1))
    tail_pivots = _eliminate_packed(aug, range(k, n))
    if tail_pivots != list(range(k, n)):
        raise RankDeficient("tail block unexpectedly singular")
    red = _unpack(aug, n + r)
    low = red[:, :n]
    b_inv_arr = red[:, n:]

    h_tilde_arr = np.concatenate([np.zeros((k, n), dtype=np.uint8), low], axis=0)
    if k > 0:
        gen_arr = np.concatenate([np.eye(k, dtype=np.uint8), low[:, :k].T], axis=1)
    else:
        gen_arr = None

    pc = NormalizedParityCheck(
        h=BitMatrix.from_array(arr),
        col_perm=perm,
        b_inv=BitMatrix.from_array(b_inv_arr),
        h_tilde=BitMatrix.from_array(h_tilde_arr),
        gen=BitMatrix.from_array(gen_arr) if gen_arr is not None else None,
        info_cols=perm[:k].copy(),
    )
    return pc


def coset_shift(pc: NormalizedParityCheck, x: BitVector) -> BitVector:
    """The unique s with zeros in its first k coordinates and x^s a codeword."""
    if x.len != pc.n:
        raise DimensionMismatch(f"expected length {pc.n}, got {x.len}")
    return mat_vec(pc.h_tilde, x)


def uniform_codeword(pc: NormalizedParityCheck, v: BitVector) -> BitVector:
    """v ^ (H-tilde v); uniform over the codebook for uniform v."""
    if v.len != pc.n:
        raise DimensionMismatch(f"expected length {pc.n}, got {v.len}")
    return v ^ mat_vec(pc.h_tilde, v)


def info_bits(pc: NormalizedParityCheck, c: BitVector) -> BitVector:
    """Information bits u with u @ gen == c; requires c to be a codeword."""
    if c.len != pc.n:
        raise DimensionMismatch(f"expected length {pc.n}, got {c.len}")
    if pc.k == 0:
        raise NotACodeword("code has no information bits")
    if mat_vec(pc.h, c).weight() != 0:
        raise NotACodeword("input fails the parity check")
    return BitVector.from_array(c.to_array()[: pc.k])


# ---------------------------------------------------------------------------
# batch (unpacked uint8) counterparts used by the simulation paths

def coset_shift_batch(pc: NormalizedParityCheck, xs: np.ndarray) -> np.ndarray:
    """H-tilde @ x for rows of ``xs`` (shape (batch, n)), unpacked output."""
    xs = np.asarray(xs, dtype=np.uint8)
    if pc._h_tilde_low_mat is None:
        pc._h_tilde_low_mat = BitMatrix(pc.h.rows, pc.n, pc.h_tilde.words[pc.k:])
    syn = mat_vec_batch(pc._h_tilde_low_mat, xs)
    out = np.zeros_like(xs)
    out[:, pc.k:] = syn
    return out


def encode_batch(pc: NormalizedParityCheck, us: np.ndarray) -> np.ndarray:
    """u @ gen for rows of ``us`` (shape (batch, k))."""
    us = np.asarray(us, dtype=np.uint8)
    if us.shape[-1] != pc.k:
        raise DimensionMismatch("information length mismatch")
    if pc._gen_right is None:
        pc._gen_right = BitMatrix.from_array(pc.gen.to_array()[:, pc.k:].T)
    right = mat_vec_batch(pc._gen_right, us)
    return np.concatenate([us, right], axis=1)
