"""Channel and source models, the symmetrized-channel constructor, and
exact information measures used for rate selection.

Finite channels are plain likelihood tables. Continuous (Gaussian) models are
kept analytic for LLR purposes and discretized only for information measures,
using a 2001-point uniform grid over +-8 standard deviations.
"""

from __future__ import annotations

import numpy as np

LLR_CLAMP = 40.0
QUAD_POINTS = 2001
QUAD_SPAN = 8.0
_TOL = 1e-12


class ChannelError(Exception):
    pass


class NonConvergence(ChannelError):
    pass


def entropy_bits(p: np.ndarray) -> float:
    """Entropy of a pmf in bits; zero-probability cells contribute zero."""
    p = np.asarray(p, dtype=float).ravel()
    mask = p > 0
    return float(-(p[mask] * np.log2(p[mask])).sum())


def hb(p: float) -> float:
    """Binary entropy function in bits."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def _clamp_llr(llr):
    return np.clip(llr, -LLR_CLAMP, LLR_CLAMP)


class Dmc:
    """Binary-input channel as a likelihood table.

    ``p`` has shape (2, L): row x holds p(y|x) over the L output labels.
    """

    def __init__(self, p, labels=None):
        p = np.asarray(p, dtype=float)
        if p.ndim != 2 or p.shape[0] != 2:
            raise ChannelError("expected a (2, L) likelihood table")
        if (p < 0).any() or np.abs(p.sum(axis=1) - 1.0).max() > 1e-12:
            raise ChannelError("conditional rows must be pmfs")
        self.p = p
        self.p.setflags(write=False)
        self.labels = labels

    @property
    def n_outputs(self) -> int:
        return self.p.shape[1]

    @classmethod
    def bsc(cls, eps: float) -> "Dmc":
        return cls(np.array([[1 - eps, eps], [eps, 1 - eps]]), labels=(0, 1))

    def sample(self, x, rng) -> np.ndarray:
        """Output label indices for an array of input bits."""
        x = np.asarray(x, dtype=np.uint8)
        u = rng.random(x.shape)
        cdf = np.cumsum(self.p, axis=1)
        return (u[..., None] > cdf[x][..., :-1]).sum(axis=-1).astype(np.int64)

    def llr(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.int64)
        with np.errstate(divide="ignore"):
            num = np.log(self.p[0])
            den = np.log(self.p[1])
        return _clamp_llr(num[y] - den[y])

    def bhattacharyya(self) -> float:
        return float(np.sqrt(self.p[0] * self.p[1]).sum())

    def bms_involution(self):
        """Output-label involution pi with p(y|0) = p(pi(y)|1), or None."""
        L = self.n_outputs
        used = np.zeros(L, dtype=bool)
        pi = -np.ones(L, dtype=np.int64)
        for y in range(L):
            if pi[y] >= 0:
                continue
            for z in range(L):
                if used[z]:
                    continue
                if (abs(self.p[0, y] - self.p[1, z]) < 1e-9
                        and abs(self.p[1, y] - self.p[0, z]) < 1e-9):
                    pi[y], pi[z] = z, y
                    used[y] = used[z] = True
                    break
            else:
                return None
        return pi


class JointSource:
    """Joint pmf p(x, y) of a binary X and a finite Y."""

    def __init__(self, pxy, labels=None):
        pxy = np.asarray(pxy, dtype=float)
        if pxy.ndim != 2 or pxy.shape[0] != 2:
            raise ChannelError("expected a (2, L) joint table")
        if (pxy < 0).any() or abs(pxy.sum() - 1.0) > 1e-12:
            raise ChannelError("joint entries must sum to 1")
        self.pxy = pxy
        self.pxy.setflags(write=False)
        self.labels = labels

    @classmethod
    def from_factored(cls, px1: float, ch: Dmc) -> "JointSource":
        """p(x) Bern(px1) pushed through a channel table."""
        px = np.array([1 - px1, px1])
        return cls(px[:, None] * ch.p, labels=ch.labels)

    @classmethod
    def degenerate(cls, px1: float) -> "JointSource":
        """Source with a constant (information-free) observation."""
        return cls(np.array([[1 - px1], [px1]]))

    def px(self) -> np.ndarray:
        return self.pxy.sum(axis=1)

    def py(self) -> np.ndarray:
        return self.pxy.sum(axis=0)

    def cond_entropy(self) -> float:
        """H(X|Y) in bits."""
        py = self.py()
        h = 0.0
        for y in range(self.pxy.shape[1]):
            if py[y] <= 0:
                continue
            h += py[y] * entropy_bits(self.pxy[:, y] / py[y])
        return h

    def sample(self, count, rng):
        """(x, y) pairs drawn i.i.d. from the joint."""
        flat = self.pxy.ravel()
        idx = rng.choice(flat.size, size=count, p=flat)
        return (idx // self.pxy.shape[1]).astype(np.uint8), idx % self.pxy.shape[1]


class SymmetrizedDmc(Dmc):
    """The symmetric channel with output (y, v) built from a joint p(x, y).

    Output label (y, v) is flattened to index 2*y + v. The defining table
    identity is pbar(y, v | x) = p_{X,Y}(x ^ v, y).
    """

    def __init__(self, joint: JointSource):
        L = joint.pxy.shape[1]
        p = np.zeros((2, 2 * L))
        for y in range(L):
            for v in (0, 1):
                for x in (0, 1):
                    p[x, 2 * y + v] = joint.pxy[x ^ v, y]
        super().__init__(p)
        self.joint = joint

    def out_index(self, y, v):
        return 2 * np.asarray(y, dtype=np.int64) + np.asarray(v, dtype=np.int64)


def symmetrize(j: JointSource) -> SymmetrizedDmc:
    return SymmetrizedDmc(j)


def mutual_info(input_dist, ch: Dmc) -> float:
    """I(X;Y) in bits for a binary input pmf and a finite channel."""
    px = np.asarray(input_dist, dtype=float)
    if px.shape != (2,) or abs(px.sum() - 1.0) > 1e-9:
        raise ChannelError("input_dist must be a binary pmf")
    py = px @ ch.p
    mi = 0.0
    for x in (0, 1):
        for y in range(ch.n_outputs):
            pj = px[x] * ch.p[x, y]
            if pj > 0 and py[y] > 0:
                mi += pj * np.log2(ch.p[x, y] / py[y])
    return float(mi)


def cond_entropy(j: JointSource) -> float:
    return j.cond_entropy()


# ---------------------------------------------------------------------------
# continuous (Gaussian) models

class GaussianMixtureJoint:
    """Joint law of a binary X and a real Y that is conditionally a unit-
    variance Gaussian mixture: p(y|x) = sum_i w[x][i] * N(y; mu[x][i], 1).

    Covers Y = X + gS + Z (mixture over the state) and the per-user broadcast
    channels (mixture over the other user's signal).
    """

    def __init__(self, px1: float, means0, weights0, means1, weights1):
        self.px = np.array([1 - px1, px1], dtype=float)
        self.means = (np.asarray(means0, float), np.asarray(means1, float))
        w0 = np.asarray(weights0, float)
        w1 = np.asarray(weights1, float)
        if abs(w0.sum() - 1) > 1e-9 or abs(w1.sum() - 1) > 1e-9:
            raise ChannelError("mixture weights must sum to 1")
        self.weights = (w0, w1)

    def density(self, x: int, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        mu = self.means[x]
        w = self.weights[x]
        z = y[..., None] - mu
        return (w * np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)).sum(axis=-1)

    def sample_y_given_x(self, x, rng) -> np.ndarray:
        x = np.asarray(x, dtype=np.uint8)
        y = rng.normal(size=x.shape)
        for xv in (0, 1):
            m = x == xv
            if not m.any():
                continue
            comp = rng.choice(len(self.weights[xv]), size=int(m.sum()),
                              p=self.weights[xv])
            y[m] += self.means[xv][comp]
        return y

    def sym_llr(self, y, v) -> np.ndarray:
        """LLR of the symmetrized channel at output (y, v):
        log pXY(v, y) / pXY(v^1, y)."""
        y = np.asarray(y, dtype=float)
        v = np.asarray(v, dtype=np.uint8)
        num = self.px[0] * self.density(0, y)
        den = self.px[1] * self.density(1, y)
        with np.errstate(divide="ignore"):
            llr = np.log(num) - np.log(den)
        sign = 1.0 - 2.0 * v.astype(float)
        return _clamp_llr(sign * llr)

    def _grid(self):
        mus = np.concatenate([self.means[0], self.means[1]])
        lo = mus.min() - QUAD_SPAN
        hi = mus.max() + QUAD_SPAN
        return np.linspace(lo, hi, QUAD_POINTS)

    def discretize(self) -> JointSource:
        ys = self._grid()
        dy = ys[1] - ys[0]
        pxy = np.stack([self.px[0] * self.density(0, ys) * dy,
                        self.px[1] * self.density(1, ys) * dy])
        pxy /= pxy.sum()
        return JointSource(pxy, labels=ys)

    def cond_entropy(self) -> float:
        """H(X|Y) by quadrature."""
        return self.discretize().cond_entropy()

    def sym_bhattacharyya(self) -> float:
        """Bhattacharyya parameter of the symmetrized channel:
        2 * integral sqrt(pXY(0,y) pXY(1,y)) dy."""
        ys = self._grid()
        dy = ys[1] - ys[0]
        f0 = self.px[0] * self.density(0, ys)
        f1 = self.px[1] * self.density(1, ys)
        return float(2.0 * np.sqrt(f0 * f1).sum() * dy)


class BiAwgn:
    """BPSK over unit-variance AWGN; bit 0 -> +sqrt(P), bit 1 -> -sqrt(P)."""

    def __init__(self, power: float):
        if power < 0:
            raise ChannelError("power must be nonnegative")
        self.power = float(power)
        self.amp = float(np.sqrt(power))

    def sample(self, x, rng) -> np.ndarray:
        x = np.asarray(x, dtype=np.uint8)
        s = self.amp * (1.0 - 2.0 * x.astype(float))
        return s + rng.normal(size=x.shape)

    def llr(self, y) -> np.ndarray:
        return _clamp_llr(2.0 * self.amp * np.asarray(y, dtype=float))

    def as_mixture(self) -> GaussianMixtureJoint:
        return GaussianMixtureJoint(0.5, [self.amp], [1.0], [-self.amp], [1.0])

    def capacity(self) -> float:
        mix = self.as_mixture()
        return 1.0 - mix.cond_entropy()

    def bhattacharyya(self) -> float:
        return float(np.exp(-self.power / 2.0))


class StateChannel:
    """Channel with i.i.d. state: Y = X + g*S + Z with X, S in {+-sqrt(P)}.

    Bits map through BPSK (bit 0 -> +sqrt(P)); the state is -sqrt(P) with
    probability theta. ``pxs`` (p(x=1|s)) selects the channel-input law the
    encoder targets; it is stored by the schemes, not here.
    """

    def __init__(self, power: float, g: float, theta: float):
        if power < 0 or g < 0:
            raise ChannelError("power and gain must be nonnegative")
        self.power = float(power)
        self.g = float(g)
        self.theta = float(theta)
        self.amp = float(np.sqrt(power))

    def sample_state(self, count, rng) -> np.ndarray:
        """State bits: 1 means the -sqrt(P) level (probability theta)."""
        return (rng.random(count) < self.theta).astype(np.uint8)

    def state_level(self, s_bits) -> np.ndarray:
        return self.amp * (1.0 - 2.0 * np.asarray(s_bits, float))

    def sample_y(self, x_bits, s_bits, rng) -> np.ndarray:
        x = self.amp * (1.0 - 2.0 * np.asarray(x_bits, float))
        return x + self.g * self.state_level(s_bits) + rng.normal(size=x.shape)

    def mixture_given_x(self, pxs) -> GaussianMixtureJoint:
        """Joint of (X, Y) when X is generated from S via p(x=1|s)=pxs[s]."""
        pxs = np.asarray(pxs, dtype=float)
        ps = np.array([1 - self.theta, self.theta])
        px1 = float(ps @ pxs)
        px = np.array([1 - px1, px1])
        means, weights = [], []
        for xv in (0, 1):
            mu, w = [], []
            for sv in (0, 1):
                p_s_given_x = ps[sv] * (pxs[sv] if xv else 1 - pxs[sv]) / px[xv]
                mu.append(self.amp * (1 - 2 * xv) + self.g * self.amp * (1 - 2 * sv))
                w.append(p_s_given_x)
            means.append(mu)
            weights.append(w)
        return GaussianMixtureJoint(px1, means[0], weights[0], means[1], weights[1])

    def joint_xs(self, pxs) -> JointSource:
        """Joint of (X, S) as a finite table (S is the 'observation')."""
        pxs = np.asarray(pxs, dtype=float)
        ps = np.array([1 - self.theta, self.theta])
        pxy = np.zeros((2, 2))
        for sv in (0, 1):
            pxy[1, sv] = ps[sv] * pxs[sv]
            pxy[0, sv] = ps[sv] * (1 - pxs[sv])
        return JointSource(pxy)


class VectorChannel2x2:
    """Two-antenna Gaussian vector channel y = H_ch W x + z with BPSK x.

    BPSK maps bit 0 -> +1; any power scaling lives in the precoder W. Noise
    is unit-variance per branch.
    """

    def __init__(self, h_ch, w):
        self.h_ch = np.asarray(h_ch, dtype=float).reshape(2, 2)
        self.w = np.asarray(w, dtype=float).reshape(2, 2)
        if not np.isfinite(self.w).all():
            raise ChannelError("precoder must be finite")
        self.eff = self.h_ch @ self.w

    def avg_power(self) -> float:
        """E ||W x||^2 over uniform BPSK pairs (independent of correlation
        only when W is diagonal; computed exactly for uniform signs)."""
        total = 0.0
        for s1 in (1.0, -1.0):
            for s2 in (1.0, -1.0):
                v = self.w @ np.array([s1, s2])
                total += 0.25 * float(v @ v)
        return total

    def sample(self, bits, rng) -> np.ndarray:
        """bits: (batch, 2) -> outputs (batch, 2)."""
        bits = np.asarray(bits, dtype=np.uint8)
        x = 1.0 - 2.0 * bits.astype(float)
        return x @ self.eff.T + rng.normal(size=x.shape)

    def user_mixture(self, user: int, p_other1: float, p_joint=None) -> GaussianMixtureJoint:
        """Marginal channel seen by one user: Y_u given X_u, mixing over the
        other user's BPSK sign.

        ``p_joint`` (2x2 table p(x_u, x_other)) overrides the independent
        mixing law when the two inputs are correlated.
        """
        row = self.eff[user]
        a_self = row[user]
        a_other = row[1 - user]
        means, weights = [], []
        for xu in (0, 1):
            s_self = 1.0 - 2.0 * xu
            if p_joint is not None:
                pj = np.asarray(p_joint, dtype=float)
                cond = pj[xu] / pj[xu].sum()
                w = [cond[0], cond[1]]
            else:
                w = [1 - p_other1, p_other1]
            means.append([a_self * s_self + a_other, a_self * s_self - a_other])
            weights.append(w)
        px1 = 0.5 if p_joint is None else float(np.asarray(p_joint)[1].sum())
        return GaussianMixtureJoint(px1, means[0], weights[0], means[1], weights[1])


# ---------------------------------------------------------------------------
# Lloyd-Max scalar quantization

class Quantizer:
    """Scalar quantizer: sorted boundaries plus one level per cell."""

    def __init__(self, boundaries, levels):
        self.boundaries = np.asarray(boundaries, dtype=float)
        self.levels = np.asarray(levels, dtype=float)
        if self.boundaries.size != self.levels.size - 1:
            raise ChannelError("need levels-1 boundaries")

    def quantize(self, y) -> np.ndarray:
        """Cell indices for samples y."""
        return np.searchsorted(self.boundaries, np.asarray(y, dtype=float))

    def cell_probs(self, ys, weights) -> np.ndarray:
        idx = self.quantize(ys)
        w = np.asarray(weights, dtype=float)
        return np.array([w[idx == j].sum() for j in range(self.levels.size)]) / w.sum()


def lloyd_max(ys, weights, levels: int, max_iter: int = 500,
              tol: float = 1e-10) -> Quantizer:
    """Lloyd-Max design on a density given as (grid points, weights).

    Alternates centroid and midpoint-boundary updates; the mean squared
    distortion is non-increasing per iteration. Raises NonConvergence if the
    fixed point is not reached within ``max_iter``.
    """
    if levels < 2:
        raise ChannelError("need at least 2 levels")
    ys = np.asarray(ys, dtype=float)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    # initialize levels at density quantiles
    cdf = np.cumsum(w)
    reps = np.interp((np.arange(levels) + 0.5) / levels, cdf, ys)
    prev = np.inf
    for _ in range(max_iter):
        bounds = 0.5 * (reps[:-1] + reps[1:])
        idx = np.searchsorted(bounds, ys)
        new_reps = reps.copy()
        for j in range(levels):
            m = idx == j
            pj = w[m].sum()
            if pj > 0:
                new_reps[j] = float((ys[m] * w[m]).sum() / pj)
        dist = float(((ys - new_reps[idx]) ** 2 * w).sum())
        if dist > prev + 1e-12:
            raise NonConvergence("distortion increased")
        moved = np.abs(new_reps - reps).max()
        reps = new_reps
        if moved < tol:
            return Quantizer(0.5 * (reps[:-1] + reps[1:]), reps)
        prev = dist
    raise NonConvergence("no fixed point within max_iter")


def gaussian_grid(means, weights, points: int = QUAD_POINTS,
                  span: float = QUAD_SPAN):
    """Grid and weights for a unit-variance Gaussian mixture density."""
    means = np.asarray(means, dtype=float)
    wts = np.asarray(weights, dtype=float)
    ys = np.linspace(means.min() - span, means.max() + span, points)
    z = ys[:, None] - means
    dens = (wts * np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)).sum(axis=1)
    return ys, dens / dens.sum()
