"""Target-distribution and precoder searches feeding the coding schemes.

The builders in :mod:`netbricks.schemes` consume a target joint distribution
(and, for the Gaussian models, a precoding or power-allocation matrix). This
module computes those targets: a grid maximizer for the state-channel input
law, particle-swarm and genetic searches for the broadcast and relay sum-rate
objectives, the standard linear-precoder baselines, and the exact constituent
code-rate plans derived from the target distributions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import (QUAD_POINTS, QUAD_SPAN, BiAwgn, GaussianMixtureJoint,
                       JointSource, NonConvergence, StateChannel,
                       VectorChannel2x2, entropy_bits, gaussian_grid, hb,
                       lloyd_max)


class OptimError(Exception):
    pass


class PowerInfeasible(OptimError):
    """The supplied precoder violates the transmit-power constraint."""


class Infeasible(OptimError):
    """No sampled candidate satisfied the information constraints."""


class NegativeRate(OptimError):
    """A constituent code rate came out negative (back-off too large)."""


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class RatePoint:
    """Named constituent code rates with their defining expressions.

    Parameters
    ----------
    rates : dict
        Rate name -> value in bits per channel use; all must be >= 0.
    exprs : dict
        Rate name -> the defining expression as a string, recorded so a
        persisted plan stays self-describing.
    """

    rates: dict
    exprs: dict

    def __post_init__(self):
        for name, val in self.rates.items():
            if val < 0:
                raise NegativeRate(f"{name} = {val:.6f} < 0")
            if name not in self.exprs:
                raise OptimError(f"missing expression for rate {name}")

    def __getitem__(self, name: str) -> float:
        return self.rates[name]


@dataclass(frozen=True)
class SearchSpec:
    """Search box and method for the black-box maximizers.

    ``budget`` is the iteration count for particle-swarm, the generation
    count for genetic, and the number of points per axis for grid.
    """

    lo: tuple
    hi: tuple
    method: str = "particle-swarm"
    budget: int = 200
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.box()
        if lo.size == 0 or lo.size != hi.size:
            raise OptimError("search box must be nonempty")
        if (lo > hi).any():
            raise OptimError("box lower bounds exceed upper bounds")
        if self.method not in ("grid", "particle-swarm", "genetic"):
            raise OptimError(f"unknown method {self.method!r}")
        if self.budget < 1:
            raise OptimError("budget must be >= 1")

    def box(self):
        return (np.asarray(self.lo, dtype=float),
                np.asarray(self.hi, dtype=float))


# ---------------------------------------------------------------------------
# entropy helpers on finite joint tables

def table_entropy(p) -> float:
    """Entropy in bits of a joint pmf given as an ndarray."""
    return entropy_bits(np.asarray(p, dtype=float).ravel())


def table_cond_entropy(p, cond_axes) -> float:
    """H(rest | cond_axes) for a joint pmf ndarray."""
    p = np.asarray(p, dtype=float)
    keep = tuple(a for a in range(p.ndim) if a not in tuple(cond_axes))
    return table_entropy(p) - table_entropy(p.sum(axis=keep))


def table_mi(p, axes_a) -> float:
    """I(A; B) where A is the listed axes and B the remaining axes."""
    p = np.asarray(p, dtype=float)
    axes_a = tuple(axes_a)
    axes_b = tuple(a for a in range(p.ndim) if a not in axes_a)
    return (table_entropy(p.sum(axis=axes_b))
            + table_entropy(p.sum(axis=axes_a)) - table_entropy(p))


def istar(p) -> float:
    """Multi-way correlation sum_l H(X_l) - H(X_1,...,X_L).

    Diagnostic only: this quantity appears in rate-region statements but is
    not consumed by any implemented operating procedure.
    """
    p = np.asarray(p, dtype=float)
    total = -table_entropy(p)
    for axis in range(p.ndim):
        rest = tuple(a for a in range(p.ndim) if a != axis)
        total += table_entropy(p.sum(axis=rest))
    return total


def _mixture_cond_entropy(mix: GaussianMixtureJoint,
                          points: int = QUAD_POINTS) -> float:
    """H(X|Y) of a binary/Gaussian-mixture joint on a ``points``-long grid.

    Equivalent to ``mix.cond_entropy()`` at the default resolution; the
    knob exists so the iterative searches can trade accuracy for speed.
    """
    mus = np.concatenate([mix.means[0], mix.means[1]])
    ys = np.linspace(mus.min() - QUAD_SPAN, mus.max() + QUAD_SPAN, points)
    f0 = mix.px[0] * mix.density(0, ys)
    f1 = mix.px[1] * mix.density(1, ys)
    py = f0 + f1
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(f0 * np.log2(f0 / py) + f1 * np.log2(f1 / py))
    return float(np.nansum(h) * (ys[1] - ys[0]))


def _hb_vec(p):
    p = np.asarray(p, dtype=float)
    q = np.clip(p, 1e-300, 1.0)
    r = np.clip(1.0 - p, 1e-300, 1.0)
    out = -q * np.log2(q) - r * np.log2(r)
    return np.where((p <= 0) | (p >= 1), 0.0, out)


# ---------------------------------------------------------------------------
# generic black-box maximizers

PSO_PARTICLES = 40
PSO_INERTIA = 0.72
PSO_ACCEL = 1.49
GA_POPULATION = 64
GA_TOURNAMENT = 2
GA_MUTATION = 0.02


def particle_swarm(objective, spec: SearchSpec):
    """Box-constrained maximization; returns (best point, best value)."""
    lo, hi = spec.box()
    rng = np.random.default_rng(spec.seed)
    dim = lo.size
    x = rng.uniform(lo, hi, size=(PSO_PARTICLES, dim))
    v = np.zeros_like(x)
    f = np.array([objective(xi) for xi in x])
    pbest, fbest = x.copy(), f.copy()
    g = int(np.argmax(f))
    for _ in range(spec.budget):
        r1 = rng.random((PSO_PARTICLES, dim))
        r2 = rng.random((PSO_PARTICLES, dim))
        v = (PSO_INERTIA * v + PSO_ACCEL * r1 * (pbest - x)
             + PSO_ACCEL * r2 * (pbest[g] - x))
        x = np.clip(x + v, lo, hi)
        f = np.array([objective(xi) for xi in x])
        better = f > fbest
        pbest[better] = x[better]
        fbest[better] = f[better]
        g = int(np.argmax(fbest))
    return pbest[g], float(fbest[g])


def genetic_search(objective, spec: SearchSpec):
    """Tournament-selection genetic maximization with uniform crossover.

    Infeasible candidates may score -inf; the caller decides whether a
    -inf best value constitutes an Infeasible outcome.
    """
    lo, hi = spec.box()
    rng = np.random.default_rng(spec.seed)
    dim = lo.size
    pop = rng.uniform(lo, hi, size=(GA_POPULATION, dim))
    fit = np.array([objective(xi) for xi in pop])
    for _ in range(spec.budget):
        elite = int(np.argmax(fit))
        children = [pop[elite].copy()]
        while len(children) < GA_POPULATION:
            idx = rng.integers(0, GA_POPULATION, size=(2, GA_TOURNAMENT))
            pa = pop[idx[0][np.argmax(fit[idx[0]])]]
            pb = pop[idx[1][np.argmax(fit[idx[1]])]]
            mask = rng.random(dim) < 0.5
            child = np.where(mask, pa, pb)
            mut = rng.random(dim) < GA_MUTATION
            child[mut] = rng.uniform(lo[mut], hi[mut])
            children.append(child)
        pop = np.asarray(children)
        fit = np.array([objective(xi) for xi in pop])
    best = int(np.argmax(fit))
    return pop[best], float(fit[best])


def grid_search(objective, spec: SearchSpec):
    """Dense per-axis grid maximization (oracle for the heuristics)."""
    lo, hi = spec.box()
    axes = [np.linspace(lo[i], hi[i], spec.budget) if hi[i] > lo[i]
            else np.array([lo[i]]) for i in range(lo.size)]
    best_x, best_f = None, -np.inf
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    for xi in pts:
        f = objective(xi)
        if f > best_f:
            best_x, best_f = xi, f
    return best_x, float(best_f)


_METHODS = {"grid": grid_search, "particle-swarm": particle_swarm,
            "genetic": genetic_search}


def run_search(objective, spec: SearchSpec):
    return _METHODS[spec.method](objective, spec)


def _polish(objective, x0, lo, hi, rounds: int = 3, maxiter: int = 6000):
    """Deterministic simplex refinement of a heuristic search result.

    Maximizes within the box (candidates are clipped); infeasible points
    keep their rejection score. Never returns a worse point than ``x0``.
    """
    from scipy import optimize

    def neg(x):
        val = objective(np.clip(x, lo, hi))
        return 10.0 if not np.isfinite(val) else -val

    x = np.asarray(x0, dtype=float)
    for _ in range(rounds):
        res = optimize.minimize(neg, x, method="Nelder-Mead",
                                options={"maxiter": maxiter, "adaptive": True,
                                         "xatol": 1e-7, "fatol": 1e-10})
        x = np.clip(res.x, lo, hi)
    f0, f1 = objective(np.asarray(x0, dtype=float)), objective(x)
    return (x, f1) if f1 >= f0 else (np.asarray(x0, dtype=float), f0)


# ---------------------------------------------------------------------------
# state-channel input maximization

def gp_objective(ch: StateChannel, pxs0, pxs1, points: int = QUAD_POINTS):
    """I(X;Y) - I(X;S) for Y = X + g S + Z, vectorized over candidate
    pairs (p(x=1|s=0), p(x=1|s=1))."""
    p0, p1 = np.broadcast_arrays(np.atleast_1d(np.asarray(pxs0, dtype=float)),
                                 np.atleast_1d(np.asarray(pxs1, dtype=float)))
    theta, a, ga = ch.theta, ch.amp, ch.g * ch.amp
    # joint weights p(x, s) in the order (x,s) = (0,0),(0,1),(1,0),(1,1)
    w = np.stack([(1 - theta) * (1 - p0), theta * (1 - p1),
                  (1 - theta) * p0, theta * p1])
    px1 = w[2] + w[3]
    i_xs = _hb_vec(px1) - ((1 - theta) * _hb_vec(p0) + theta * _hb_vec(p1))
    # output densities on a shared grid; means follow the same (x,s) order
    mus = np.array([a + ga, a - ga, -a + ga, -a - ga])
    ys = np.linspace(mus.min() - QUAD_SPAN, mus.max() + QUAD_SPAN, points)
    dy = ys[1] - ys[0]
    phi = np.exp(-0.5 * (ys[:, None] - mus) ** 2) / np.sqrt(2 * np.pi)
    f0 = phi[:, :2] @ w[:2]
    f1 = phi[:, 2:] @ w[2:]
    py = f0 + f1
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(f0 * np.log2(f0 / py) + f1 * np.log2(f1 / py))
    h_x_given_y = np.nansum(h, axis=0) * dy
    i_xy = _hb_vec(px1) - h_x_given_y
    out = i_xy - i_xs
    return out if np.ndim(pxs0) or np.ndim(pxs1) else float(out[0])


def gp_symmetric_rate(ch: StateChannel, points: int = QUAD_POINTS) -> float:
    """I(X;Y) for Bern(1/2) input independent of the state."""
    return float(gp_objective(ch, 0.5, 0.5, points=points))


def gp_target(ch: StateChannel, step: float = 1.0 / 512,
              points: int = QUAD_POINTS, chunk: int = 4096):
    """Grid maximizer of I(X;Y) - I(X;S) over p(x=1|s).

    Returns ``(pxs, value)`` where ``pxs = (p(x=1|s=0), p(x=1|s=1))``.
    """
    grid = np.arange(0.0, 1.0 + step / 2, step)
    mesh0, mesh1 = np.meshgrid(grid, grid, indexing="ij")
    c0, c1 = mesh0.ravel(), mesh1.ravel()
    best_val, best_idx = -np.inf, 0
    for start in range(0, c0.size, chunk):
        sl = slice(start, start + chunk)
        vals = gp_objective(ch, c0[sl], c1[sl], points=points)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_idx = float(vals[i]), start + i
    return np.array([c0[best_idx], c1[best_idx]]), best_val


# ---------------------------------------------------------------------------
# broadcast-channel sum-rate and precoders

def h_channel(g: float) -> np.ndarray:
    """Two-user channel gain matrix with symmetric cross gain."""
    return np.array([[1.0, g], [g, 1.0]])


def bpsk_power(w, p_joint) -> float:
    """E||W x||^2 over BPSK signs distributed as p(x1, x2) (bit 0 -> +1)."""
    w = np.asarray(w, dtype=float).reshape(2, 2)
    pj = np.asarray(p_joint, dtype=float)
    total = 0.0
    for x1 in (0, 1):
        for x2 in (0, 1):
            s = np.array([1.0 - 2.0 * x1, 1.0 - 2.0 * x2])
            v = w @ s
            total += pj[x1, x2] * float(v @ v)
    return total


def marton_sum_rate(p_joint, w, power: float, g: float = 0.9,
                    points: int = QUAD_POINTS) -> float:
    """I(X1;Y1) + I(X2;Y2) - I(X1;X2) for BPSK inputs p(x1,x2), channel
    gain matrix with cross gain ``g``, and precoder ``w``.

    Raises PowerInfeasible when E||W x||^2 exceeds ``power``.
    """
    pj = np.asarray(p_joint, dtype=float)
    if bpsk_power(w, pj) > power * (1 + 1e-9):
        raise PowerInfeasible("precoder exceeds the sum-power constraint")
    vch = VectorChannel2x2(h_channel(g), w)
    h1 = hb(float(pj[1].sum()))
    h2 = hb(float(pj[:, 1].sum()))
    i1 = h1 - _mixture_cond_entropy(
        vch.user_mixture(0, float(pj[:, 1].sum()), pj), points)
    i2 = h2 - _mixture_cond_entropy(
        vch.user_mixture(1, float(pj[1].sum()), pj.T), points)
    i12 = h1 + h2 - table_entropy(pj)
    return i1 + i2 - i12


def _joint_from_chain(a: float, b: float, c: float) -> np.ndarray:
    """p(x1, x2) from p(x1=1)=a, p(x2=1|x1=0)=b, p(x2=1|x1=1)=c."""
    return np.array([[(1 - a) * (1 - b), (1 - a) * b],
                     [a * (1 - c), a * c]])


def _scale_to_power(w, p_joint, power: float):
    """Scale a precoder so the BPSK transmit power meets ``power`` exactly."""
    base = bpsk_power(w, p_joint)
    if base <= 1e-12:
        return None
    return np.asarray(w, dtype=float).reshape(2, 2) * np.sqrt(power / base)


def marton_search(spec: SearchSpec, power: float, g: float = 0.9,
                  precoding: str = "optimal", inputs: str = "search",
                  points: int = QUAD_POINTS, polish: bool = True):
    """Best-found (p(x1,x2), W, C_sum) under the sum-power constraint.

    ``precoding``: "optimal" searches a full 2x2 precoder (scaled to meet
    the power constraint with equality), "diagonal" searches a diagonal
    power split, "none" fixes W = sqrt(P/2) I. ``inputs``: "search" frees
    p(x1,x2); "uniform" fixes independent Bern(1/2) inputs.
    """
    if precoding not in ("optimal", "diagonal", "none"):
        raise OptimError(f"unknown precoding {precoding!r}")
    if inputs not in ("search", "uniform"):
        raise OptimError(f"unknown inputs {inputs!r}")
    n_p = 3 if inputs == "search" else 0
    n_w = {"optimal": 4, "diagonal": 2, "none": 0}[precoding]
    lo, hi = spec.box()
    if lo.size != n_p + n_w:
        raise OptimError(f"search box must have {n_p + n_w} dimensions")

    def decode(x):
        pj = (_joint_from_chain(*x[:n_p]) if inputs == "search"
              else np.full((2, 2), 0.25))
        if precoding == "none":
            w = np.sqrt(power / 2.0) * np.eye(2)
        elif precoding == "diagonal":
            w = _scale_to_power(np.diag(np.abs(x[n_p:]) + 1e-9), pj, power)
        else:
            w = _scale_to_power(x[n_p:].reshape(2, 2), pj, power)
        return pj, w

    def objective(x):
        pj, w = decode(x)
        if w is None or not (pj > 1e-12).all():
            return -np.inf
        return marton_sum_rate(pj, w, power, g, points)

    x_best, f_best = run_search(objective, spec)
    if polish and np.isfinite(f_best):
        x_best, f_best = _polish(objective, x_best, lo, hi)
    pj, w = decode(x_best)
    return pj, w, f_best


def precoder_no_precoding(power: float) -> np.ndarray:
    return np.sqrt(power / 2.0) * np.eye(2)


def precoder_mmse(power: float, g: float = 0.9) -> np.ndarray:
    """Transmit Wiener filter lambda (H^T H + (K/P) I)^{-1} H^T, K = 2,
    with lambda meeting the power constraint under independent inputs."""
    h = h_channel(g)
    w0 = np.linalg.solve(h.T @ h + (2.0 / power) * np.eye(2), h.T)
    return w0 * np.sqrt(power / np.sum(w0 * w0))


def precoder_zf(power: float, g: float = 0.9) -> np.ndarray:
    """Interference-suppressing inverse precoder, power-normalized."""
    w0 = np.linalg.inv(h_channel(g))
    return w0 * np.sqrt(power / np.sum(w0 * w0))


def time_division_split(power: float, g: float = 0.9):
    """Antenna power split maximizing (sqrt(l1) + g sqrt(l2))^2 subject to
    l1 + l2 = P; the maximizer is proportional to (1, g^2)."""
    l1 = power / (1.0 + g * g)
    return l1, power - l1


def precoder_time_division(power: float, g: float = 0.9) -> np.ndarray:
    l1, l2 = time_division_split(power, g)
    return np.diag([np.sqrt(l1), np.sqrt(l2)])


def time_division_rate(power: float, g: float = 0.9) -> float:
    """Single-user rate when both antennas carry the same codeword."""
    l1, l2 = time_division_split(power, g)
    return BiAwgn((np.sqrt(l1) + g * np.sqrt(l2)) ** 2).capacity()


def independent_sum_rate(w, power: float, g: float = 0.9) -> float:
    """Sum-rate of two independent Bern(1/2) streams through precoder w."""
    return marton_sum_rate(np.full((2, 2), 0.25), w, power, g)


# ---------------------------------------------------------------------------
# downlink relay-network search

def _obs_mixture(eff_row, p_ux) -> GaussianMixtureJoint:
    """Joint of a binary U and the scalar observation eff_row . s + Z where
    the BPSK sign pair s is distributed as p(x1, x2 | u)."""
    p_ux = np.asarray(p_ux, dtype=float)
    pu1 = float(p_ux[1].sum())
    signs = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    means = signs @ np.asarray(eff_row, dtype=float)
    w0 = (p_ux[0] / p_ux[0].sum()).ravel()
    w1 = (p_ux[1] / p_ux[1].sum()).ravel()
    return GaussianMixtureJoint(pu1, means, w0, means, w1)


def cran_dl_objective(p4, lams, g: float = 0.9,
                      points: int = QUAD_POINTS) -> float:
    """I(U1;Y1) + I(U2;Y2) - I(U1;U2) for the relay power split ``lams``."""
    p4 = np.asarray(p4, dtype=float)
    eff = h_channel(g) @ np.diag(np.sqrt(np.asarray(lams, dtype=float)))
    # p(u_j, x1, x2) tables for each user's observation
    p1 = p4.sum(axis=1)
    p2 = p4.sum(axis=0)
    i1 = hb(float(p1[1].sum())) - _mixture_cond_entropy(
        _obs_mixture(eff[0], p1), points)
    i2 = hb(float(p2[1].sum())) - _mixture_cond_entropy(
        _obs_mixture(eff[1], p2), points)
    return i1 + i2 - table_mi(p4.sum(axis=(2, 3)), (0,))


def cran_dl_constraints(p4) -> tuple:
    """(I(U1,U2; X1), I(U1,U2,X1; X2)) for the fronthaul feasibility set."""
    p4 = np.asarray(p4, dtype=float)
    return (table_mi(p4.sum(axis=3), (0, 1)), table_mi(p4, (0, 1, 2)))


def cran_dl_search(spec: SearchSpec, c1: float, c2: float, power: float,
                   g: float = 0.9, points: int = QUAD_POINTS,
                   polish: bool = True):
    """Best-found (p(u1,u2,x1,x2), (lambda1, lambda2), C_sum) subject to
    C1 > I(U1,U2;X1) and C2 > I(U1,U2,X1;X2); per-relay power <= ``power``.

    Candidates violating the fronthaul constraints are rejected (scored
    -inf); raises Infeasible when no sampled candidate was feasible.
    """
    lo, hi = spec.box()
    if lo.size != 18:
        raise OptimError("search box must have 18 dimensions "
                         "(16 joint weights + 2 power levels)")

    def decode(x):
        w = np.asarray(x[:16], dtype=float) + 1e-9
        p4 = (w / w.sum()).reshape(2, 2, 2, 2)
        lams = np.clip(x[16:], 0.0, 1.0) * power
        return p4, lams

    def objective(x):
        p4, lams = decode(x)
        m1, m2 = cran_dl_constraints(p4)
        if m1 >= c1 or m2 >= c2 or min(lams) <= 1e-9:
            return -np.inf
        return cran_dl_objective(p4, lams, g, points)

    x_best, f_best = run_search(objective, spec)
    if not np.isfinite(f_best):
        raise Infeasible("no candidate met the fronthaul constraints")
    if polish:
        x_best, f_best = _polish(objective, x_best, lo, hi)
    p4, lams = decode(x_best)
    return p4, tuple(lams), f_best


# ---------------------------------------------------------------------------
# uplink relay-network search

def _ul_table(p1: float, p2: float, tests, power: float, g: float):
    """Joint p(x1, x2, y1, y2, yh1, yh2) for the binary-quantized two-relay
    model, with per-relay quantizers refit to the candidate input laws.

    ``tests`` holds the two test-channel tables p(yh=1 | y) as a (2, 2)
    array (rows indexed by relay). Returns (table, (q1, q2)).
    """
    from scipy.stats import norm

    amp = np.sqrt(power)
    pj = np.outer([1 - p1, p1], [1 - p2, p2])
    s1 = (1.0 - 2.0 * np.arange(2.0))[:, None]
    s2 = (1.0 - 2.0 * np.arange(2.0))[None, :]
    quants, py_given_x = [], []
    for means in (amp * s1 + g * amp * s2, amp * s2 + g * amp * s1):
        ys, wts = gaussian_grid(means.ravel(), pj.ravel())
        q = lloyd_max(ys, wts, 2)
        quants.append(q)
        # cell 1 holds samples above the single boundary
        py1 = norm.sf(float(q.boundaries[0]) - means)
        py_given_x.append(np.stack([1.0 - py1, py1], axis=-1))
    table = (pj[:, :, None, None] * py_given_x[0][:, :, :, None]
             * py_given_x[1][:, :, None, :])
    t = np.asarray(tests, dtype=float)
    h1 = np.stack([1.0 - t[0], t[0]], axis=-1)
    h2 = np.stack([1.0 - t[1], t[1]], axis=-1)
    full = (table[..., None, None] * h1[None, None, :, None, :, None]
            * h2[None, None, None, :, None, :])
    return full, tuple(quants)


def cran_ul_objective(table) -> float:
    """I(X1, X2; Yh1, Yh2) from the full six-way table."""
    return table_mi(table.sum(axis=(2, 3)), (0, 1))


def cran_ul_constraints(table) -> tuple:
    """(I(Y1;Yh1), I(Y2;Yh2) - I(Yh1;Yh2)) for the backhaul set."""
    p_y1h1 = table.sum(axis=(0, 1, 3, 5))
    p_y2h2 = table.sum(axis=(0, 1, 2, 4))
    p_h1h2 = table.sum(axis=(0, 1, 2, 3))
    return (table_mi(p_y1h1, (0,)),
            table_mi(p_y2h2, (0,)) - table_mi(p_h1h2, (0,)))


def cran_ul_search(spec: SearchSpec, c1: float, c2: float, power: float,
                   g: float = 0.9, polish: bool = True):
    """Best-found product law p(x1)p(x2)p(yh1|y1)p(yh2|y2) maximizing
    I(X1,X2; Yh1,Yh2) subject to C1 > I(Y1;Yh1) and
    C2 > I(Y2;Yh2) - I(Yh1;Yh2).

    Each candidate refits the two scalar quantizers to its input laws
    before evaluation. Returns (params dict, (q1, q2), C_sum).
    """
    lo, hi = spec.box()
    if lo.size != 6:
        raise OptimError("search box must have 6 dimensions "
                         "(2 input laws + 4 test-channel entries)")

    def decode(x):
        return float(x[0]), float(x[1]), np.asarray(x[2:], float).reshape(2, 2)

    def objective(x):
        p1, p2, tests = decode(x)
        try:
            table, _ = _ul_table(p1, p2, tests, power, g)
        except NonConvergence:
            return -np.inf
        m1, m2 = cran_ul_constraints(table)
        if m1 >= c1 or m2 >= c2:
            return -np.inf
        return cran_ul_objective(table)

    x_best, f_best = run_search(objective, spec)
    if not np.isfinite(f_best):
        raise Infeasible("no candidate met the backhaul constraints")
    if polish:
        x_best, f_best = _polish(objective, x_best, lo, hi)
    p1, p2, tests = decode(x_best)
    table, quants = _ul_table(p1, p2, tests, power, g)
    params = {"p1": p1, "p2": p2, "tests": tests, "table": table}
    return params, quants, f_best


# ---------------------------------------------------------------------------
# constituent code-rate plans

def _lossy_pair_joint(theta: float, d: float) -> np.ndarray:
    """p(xhat, x) for the backward test channel of a Bern(theta) source at
    Hamming distortion d."""
    alpha = (theta - d) / (1.0 - 2.0 * d)
    if not 0.0 < alpha <= 0.5:
        raise OptimError("distortion incompatible with the source bias")
    p = np.zeros((2, 2))
    for xh in (0, 1):
        for x in (0, 1):
            p[xh, x] = (alpha if xh else 1 - alpha) * (d if x != xh else 1 - d)
    return p


def rate_plan(kind: str, dists: dict, gammas: dict) -> RatePoint:
    """Constituent code rates for a scheme kind at a target distribution.

    ``kind`` is one of "gp", "lossy", "marton", "cran_dl", "cran_ul";
    ``dists`` carries the model objects or joint tables named below, and
    ``gammas`` the back-off parameters ("gamma", or "gamma_r"/"gamma_c").
    """
    if kind == "gp":
        ch, pxs = dists["channel"], dists["pxs"]
        gamma = gammas["gamma"]
        hxy = ch.mixture_given_x(pxs).cond_entropy()
        hxs = ch.joint_xs(pxs).cond_entropy()
        return RatePoint(
            {"R1": 1 - hxy - gamma, "R2": 1 - hxs},
            {"R1": "1 - H(X|Y) - gamma", "R2": "1 - H(X|S)"})
    if kind == "lossy":
        pj = _lossy_pair_joint(dists["theta"], dists["d"])
        gamma = gammas["gamma"]
        return RatePoint(
            {"R1": 1 - table_cond_entropy(pj, (1,)),
             "R2": 1 - table_entropy(pj.sum(axis=1)) - gamma},
            {"R1": "1 - H(Xhat|X)", "R2": "1 - H(Xhat) - gamma"})
    if kind == "marton":
        pj = np.asarray(dists["p_joint"], dtype=float)
        vch = dists["vch"]
        gamma = gammas["gamma"]
        h1 = hb(float(pj[1].sum()))
        h2 = hb(float(pj[:, 1].sum()))
        h1y = vch.user_mixture(0, float(pj[:, 1].sum()), pj).cond_entropy()
        h2y = vch.user_mixture(1, float(pj[1].sum()), pj.T).cond_entropy()
        return RatePoint(
            {"R11": 1 - h1y - gamma, "R12": 1 - h1,
             "R21": 1 - h2y - gamma,
             "R22": 1 - table_cond_entropy(pj, (0,))},
            {"R11": "1 - H(X1|Y1) - gamma", "R12": "1 - H(X1)",
             "R21": "1 - H(X2|Y2) - gamma", "R22": "1 - H(X2|X1)"})
    if kind == "cran_dl":
        p4 = np.asarray(dists["p4"], dtype=float)
        lams, g = dists["lams"], dists.get("g", 0.9)
        gr, gc = gammas["gamma_r"], gammas["gamma_c"]
        eff = h_channel(g) @ np.diag(np.sqrt(np.asarray(lams, dtype=float)))
        h1y = _obs_mixture(eff[0], p4.sum(axis=1)).cond_entropy()
        h2y = _obs_mixture(eff[1], p4.sum(axis=0)).cond_entropy()
        p_u = p4.sum(axis=(2, 3))
        return RatePoint(
            {"R11": 1 - h1y - gr,
             "R12": 1 - table_entropy(p_u.sum(axis=1)),
             "R21": 1 - h2y - gr,
             "R22": 1 - table_cond_entropy(p_u, (0,)),
             "R31": 1 - table_cond_entropy(p4.sum(axis=3), (0, 1)),
             "R32": 1 - table_entropy(p4.sum(axis=(0, 1, 3))) - gc,
             "R41": 1 - table_cond_entropy(p4, (0, 1, 2)),
             "R42": 1 - table_entropy(p4.sum(axis=(0, 1, 2))) - gc},
            {"R11": "1 - H(U1|Y1) - gamma_r", "R12": "1 - H(U1)",
             "R21": "1 - H(U2|Y2) - gamma_r", "R22": "1 - H(U2|U1)",
             "R31": "1 - H(X1|U1,U2)", "R32": "1 - H(X1) - gamma_c",
             "R41": "1 - H(X2|U1,U2,X1)", "R42": "1 - H(X2) - gamma_c"})
    if kind == "cran_ul":
        table = np.asarray(dists["table"], dtype=float)
        gr, gc = gammas["gamma_r"], gammas["gamma_c"]
        # axes: (x1, x2, y1, y2, yh1, yh2)
        p_xh = table.sum(axis=(2, 3))
        p_hh = table.sum(axis=(0, 1, 2, 3))
        return RatePoint(
            {"R11": 1 - table_cond_entropy(p_xh.sum(axis=1), (1, 2)) - gr,
             "R12": 1 - table_entropy(table.sum(axis=(1, 2, 3, 4, 5))),
             "R21": 1 - table_cond_entropy(p_xh, (0, 2, 3)) - gr,
             "R22": 1 - table_entropy(table.sum(axis=(0, 2, 3, 4, 5))),
             "R31": 1 - table_cond_entropy(table.sum(axis=(0, 1, 3, 5)), (0,)),
             "R32": 1 - table_entropy(p_hh.sum(axis=1)) - gc,
             "R41": 1 - table_cond_entropy(table.sum(axis=(0, 1, 2, 4)), (0,)),
             "R42": 1 - table_cond_entropy(p_hh, (0,)) - gc},
            {"R11": "1 - H(X1|Yh1,Yh2) - gamma_r", "R12": "1 - H(X1)",
             "R21": "1 - H(X2|Yh1,Yh2,X1) - gamma_r", "R22": "1 - H(X2)",
             "R31": "1 - H(Yh1|Y1)", "R32": "1 - H(Yh1) - gamma_c",
             "R41": "1 - H(Yh2|Y2)", "R42": "1 - H(Yh2|Yh1) - gamma_c"})
    raise OptimError(f"unknown scheme kind {kind!r}")
