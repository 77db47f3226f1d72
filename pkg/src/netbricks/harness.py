"""Monte-Carlo experiment runner producing CSV campaigns.

An experiment is a sweep along one axis (power in dB, distortion target,
block length, capacity pair); each sweep point runs batches of independent
trials whose dither streams are derived from (master seed, point index,
batch index) by counter, so results do not depend on worker scheduling.
Statistics accumulate in mergeable ``TrialStats`` records, estimates carry
Wilson 95% confidence intervals, and campaigns persist as CSV files plus a
JSON-lines manifest keyed by the config hash.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import __version__, optim
from . import polarbrick as pb
from . import schemes as sch
from .channels import (QUAD_POINTS, Dmc, JointSource, StateChannel,
                       VectorChannel2x2, hb)
from .schemes import DitherStream, trial_stream


class HarnessError(Exception):
    pass


class ConfigError(HarnessError):
    pass


EARLY_STOP_ERRORS = 200   # stop a sweep point once this many errors accrue
BATCH = 25                # trials simulated per counter-derived stream
_COUNTER_STRIDE = 1_000_000  # batch counters per sweep point

CSV_HEADER = "axis,metric,value,ci_lo,ci_hi,trials,seed"


# ---------------------------------------------------------------------------
# configuration and statistics

@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a trial kernel, an axis, and scalar parameters."""

    kernel: str
    axis_name: str
    axis: tuple
    n: int
    trials: int
    seed: int
    params: tuple = ()

    def __post_init__(self):
        if self.trials < 100:
            raise ConfigError("need at least 100 trials per sweep point")
        if len(self.axis) == 0:
            raise ConfigError("sweep axis must be nonempty")
        if self.n < 2:
            raise ConfigError("block length must be at least 2")

    @classmethod
    def make(cls, kernel, axis_name, axis, n, trials, seed, **params):
        return cls(kernel, axis_name, tuple(axis), int(n), int(trials),
                   int(seed), tuple(sorted(params.items())))

    def param(self, key, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default

    def point_params(self, point) -> dict:
        """Scalar parameters with the axis value filled in."""
        d = dict(self.params)
        d[self.axis_name] = point
        return d

    def digest(self) -> str:
        blob = json.dumps(
            [self.kernel, self.axis_name, list(map(str, self.axis)),
             self.n, self.trials, self.seed,
             [[k, str(v)] for k, v in self.params]],
            sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class TrialStats:
    """Associative accumulator for one sweep point."""

    trials: int = 0
    errors: int = 0
    distortion_sum: float = 0.0
    distortion_sq: float = 0.0
    bias_sum: float = 0.0
    bias_sq: float = 0.0
    spectra: np.ndarray = None

    def __post_init__(self):
        if not 0 <= self.errors <= self.trials:
            raise ConfigError("error count must lie in [0, trials]")

    def merge(self, other: "TrialStats") -> "TrialStats":
        if self.spectra is None:
            spec = None if other.spectra is None else other.spectra.copy()
        elif other.spectra is None:
            spec = self.spectra.copy()
        else:
            spec = self.spectra + other.spectra
        return TrialStats(self.trials + other.trials,
                          self.errors + other.errors,
                          self.distortion_sum + other.distortion_sum,
                          self.distortion_sq + other.distortion_sq,
                          self.bias_sum + other.bias_sum,
                          self.bias_sq + other.bias_sq, spec)

    @property
    def bler(self) -> float:
        return self.errors / max(self.trials, 1)

    def bler_ci(self):
        return pb.wilson_interval(self.errors, max(self.trials, 1))

    def _mean_ci(self, total, sq):
        m = total / max(self.trials, 1)
        var = max(sq / max(self.trials, 1) - m * m, 0.0)
        half = 1.96 * np.sqrt(var / max(self.trials, 1))
        return m, m - half, m + half

    def distortion_ci(self):
        return self._mean_ci(self.distortion_sum, self.distortion_sq)

    def bias_ci(self):
        return self._mean_ci(self.bias_sum, self.bias_sq)


# ---------------------------------------------------------------------------
# trial kernels

class Kernel:
    """One sweep point of one experiment: build once, simulate batches.

    ``simulate(stream, count)`` runs ``count`` independent blocks and
    ``rows(stats)`` turns the accumulated statistics into CSV metrics.
    """

    def __init__(self, cfg: ExperimentConfig, point):
        self.cfg = cfg
        self.point = point
        self.p = cfg.point_params(point)
        self.n = int(self.p.pop("n", cfg.n))
        self.build()

    def build(self):
        raise NotImplementedError

    def simulate(self, stream: DitherStream, count: int) -> TrialStats:
        raise NotImplementedError

    def simulate_counter(self, counter: int, count: int) -> TrialStats:
        return self.simulate(trial_stream(self.cfg.seed, counter), count)

    def rows(self, stats: TrialStats):
        v = stats.bler
        lo, hi = stats.bler_ci()
        return [("bler", v, lo, hi)]


class SwBscKernel(Kernel):
    """Slepian-Wolf coding of X ~ Bern(1/2) with side information through
    a BSC(eps); a block errs when any source bit is misrecovered."""

    def build(self):
        eps = float(self.p["eps"])
        self.joint = JointSource.from_factored(0.5, Dmc.bsc(eps))
        gamma = float(self.p.get("gamma", 1.0 / 8))
        k = self.p.get("k")
        if k is None:
            self.sw = sch.SlepianWolf.for_joint(self.joint, self.n, gamma)
        else:
            from .channels import symmetrize
            self.sw = sch.SlepianWolf(self.n, int(k), symmetrize(self.joint))
        self.llr_table = sch.pair_llr_table(self.joint)

    def simulate(self, stream, count):
        rng = stream.child("source").rng
        xs, ys = self.joint.sample(count * self.n, rng)
        xs = xs.reshape(count, self.n).astype(np.uint8)
        ys = ys.reshape(count, self.n)
        ts = self.sw.encode(xs)
        xh = self.sw.decode(ts, self.llr_table[ys], stream)
        errs = int(np.any(xh != xs, axis=1).sum())
        return TrialStats(trials=count, errors=errs)


class P2pBscKernel(Kernel):
    """Channel coding over a BSC(eps) via the Slepian-Wolf construction."""

    def build(self):
        eps = float(self.p["eps"])
        self.eps = eps
        joint = JointSource.from_factored(0.5, Dmc.bsc(eps))
        gamma = float(self.p.get("gamma", 1.0 / 8))
        k = self.p.get("k")
        from .channels import symmetrize
        if k is None:
            sw = sch.SlepianWolf.for_joint(joint, self.n, gamma)
        else:
            sw = sch.SlepianWolf(self.n, int(k), symmetrize(joint))
        self.p2p = sch.P2PFromSw(sw)
        table = joint.pxy
        with np.errstate(divide="ignore"):
            self.llr_table = np.clip(np.log(table[0] / table[1]), -40, 40)

    def simulate(self, stream, count):
        rng = stream.child("chan").rng
        ms = stream.child("msg").bits((count, self.p2p.k))
        x = self.p2p.encode(ms, stream)
        noise = (rng.random(x.shape) < self.eps).astype(np.uint8)
        y = x ^ noise
        mh = self.p2p.decode(self.llr_table[y], stream)
        errs = int(np.any(mh != ms, axis=1).sum())
        return TrialStats(trials=count, errors=errs)


class BrickBscKernel(Kernel):
    """Small hard-decoded code over a BSC(eps), exactly enumerable by
    ``bricks.exact_error_prob`` for calibrating the runner's intervals."""

    def build(self):
        from . import bricks
        eps = float(self.p["eps"])
        self.eps = eps
        self.ch = Dmc.bsc(eps)
        self.brick = bricks.BrickP2P.from_polar(
            pb.construct(self.ch, int(self.p.get("k", 4)), self.n))
        self.llr_table = self.ch.llr(np.arange(2))

    def simulate(self, stream, count):
        rng = stream.child("chan").rng
        msgs = stream.child("msg").bits((count, self.brick.k))
        cw = self.brick.polar.encode_batch(msgs)
        ys = cw ^ (rng.random(cw.shape) < self.eps).astype(np.uint8)
        dec = self.brick.decode_batch(self.llr_table[ys])
        errs = int(np.any(dec != cw, axis=1).sum())
        return TrialStats(trials=count, errors=errs)


class LossyKernel(Kernel):
    """Fixed-rate lossy coding of a Bern(theta) source; reports rate,
    block distortion, and reconstruction bias."""

    def build(self):
        theta = float(self.p["theta"])
        d = float(self.p["d"])
        gamma_s = float(self.p.get("gamma_s", 0.0))
        gamma_e = float(self.p.get("gamma_e", 1.0 / 8))
        self.theta, self.d = theta, d
        self.scheme = sch.LossyAsym.for_source(theta, d, self.n,
                                               gamma_s, gamma_e)

    def simulate(self, stream, count):
        rng = stream.child("source").rng
        xs = (rng.random((count, self.n)) < self.theta).astype(np.uint8)
        ms, u = self.scheme.encode_full(xs, stream)
        xh = self.scheme.decode(ms, stream)
        # distortion and bias of the shaped encoder reconstruction; a block
        # "errs" when the lossless carrier fails to reproduce it
        dist = np.mean(u != xs, axis=1)
        bias = np.mean(u, axis=1)
        return TrialStats(trials=count,
                          errors=int(np.any(xh != u, axis=1).sum()),
                          distortion_sum=float(dist.sum()),
                          distortion_sq=float((dist ** 2).sum()),
                          bias_sum=float(bias.sum()),
                          bias_sq=float((bias ** 2).sum()))

    def rows(self, stats):
        dv, dlo, dhi = stats.distortion_ci()
        bv, blo, bhi = stats.bias_ci()
        blv, bllo, blhi = stats.bler, *stats.bler_ci()
        r = self.scheme.rate
        # gap above the rate-distortion curve at the measured distortion
        gap = r - (hb(self.theta) - hb(max(dv, 1e-9)))
        return [("rate", r, r, r),
                ("distortion", dv, dlo, dhi),
                ("bias", bv, blo, bhi),
                ("bler", blv, bllo, blhi),
                ("rate_gap", gap, gap, gap)]


def _db_to_power(db: float) -> float:
    return 10.0 ** (float(db) / 10.0)


class GpGaussianKernel(Kernel):
    """Fixed-rate coding of Y = X + gS + Z with the Bernoulli state known
    at the encoder; the input law p(x|s) is optimized per power level."""

    def build(self):
        power = _db_to_power(self.p["power_db"])
        g = float(self.p.get("g", 0.9))
        theta = float(self.p.get("theta", 0.1))
        rate = float(self.p.get("rate", 0.5))
        self.ch = StateChannel(power, g, theta)
        if "pxs0" in self.p:
            pxs = (float(self.p["pxs0"]), float(self.p["pxs1"]))
        else:
            step = float(self.p.get("step", 1.0 / 512))
            points = int(self.p.get("points", 801))
            pxs, _ = optim.gp_target(self.ch, step=step, points=points)
        self.gp = sch.build_gp_state(self.ch, pxs, self.n,
                                     float(self.p.get("gamma", 3.0 / 16)),
                                     rate=rate)

    def simulate(self, stream, count):
        rng = stream.child("chan").rng
        ms = stream.child("msg").bits((count, self.gp.msg_bits))
        s = self.ch.sample_state(count * self.n, rng).reshape(count, self.n)
        x = self.gp.encode(ms, s, stream)
        y = self.ch.sample_y(x.ravel(), s.ravel(), rng).reshape(count, self.n)
        mh = self.gp.decode(self.gp.llr_xy(y), stream)
        errs = int(np.any(mh != ms, axis=1).sum())
        return TrialStats(trials=count, errors=errs)


class GpSymmetricKernel(Kernel):
    """Baseline for the state channel: a fixed-rate point-to-point code
    designed for the state-averaged output law."""

    def build(self):
        power = _db_to_power(self.p["power_db"])
        g = float(self.p.get("g", 0.9))
        theta = float(self.p.get("theta", 0.1))
        rate = float(self.p.get("rate", 0.5))
        self.ch = StateChannel(power, g, theta)
        self.p2p, self.llr = sch.build_gp_symmetric(self.ch, self.n, rate)

    def simulate(self, stream, count):
        rng = stream.child("chan").rng
        ms = stream.child("msg").bits((count, self.p2p.k))
        x = self.p2p.encode(ms, stream)
        s = self.ch.sample_state(count * self.n, rng).reshape(count, self.n)
        y = self.ch.sample_y(x.ravel(), s.ravel(), rng).reshape(count, self.n)
        mh = self.p2p.decode(self.llr(y), stream)
        errs = int(np.any(mh != ms, axis=1).sum())
        return TrialStats(trials=count, errors=errs)


def _h_channel(g: float) -> np.ndarray:
    return np.array([[1.0, g], [g, 1.0]])


def _rate_split(rsum: float, i1: float, i2: float):
    """Split a sum rate so both users keep the same absolute margin to
    their mutual-information limits (clipped to keep both rates positive)."""
    m = (i1 + i2 - rsum) / 2.0
    r1 = min(max(i1 - m, 0.02), rsum - 0.02)
    return r1, rsum - r1


MARTON_STRATEGIES = ("marton", "sym_opt", "mmse", "zf", "td")


def _marton_design(strategy: str, power: float, g: float,
                   budget: int, seed: int, points: int):
    """Input law and precoder for one broadcast strategy at one power."""
    box_p = ([0.05] * 3, [0.95] * 3)
    amp = float(np.sqrt(power))
    box_w = ([-amp] * 4, [amp] * 4)
    if strategy == "marton":
        spec = optim.SearchSpec(box_p[0] + box_w[0], box_p[1] + box_w[1],
                                method="particle-swarm", budget=budget,
                                seed=seed)
        pj, w, _ = optim.marton_search(spec, power, g, precoding="optimal",
                                       inputs="search", points=points)
        return pj, w
    if strategy == "sym_opt":
        spec = optim.SearchSpec(box_w[0], box_w[1], method="particle-swarm",
                                budget=budget, seed=seed)
        pj, w, _ = optim.marton_search(spec, power, g, precoding="optimal",
                                       inputs="uniform", points=points)
        return pj, w
    fixed = {"mmse": optim.precoder_mmse, "zf": optim.precoder_zf,
             "td": optim.precoder_time_division}
    if strategy not in fixed:
        raise ConfigError(f"unknown broadcast strategy: {strategy}")
    return np.full((2, 2), 0.25), fixed[strategy](power, g)


class MartonKernel(Kernel):
    """Two-user Gaussian broadcast at a fixed sum rate; the strategy picks
    the precoder and input law.  A block errs when either user fails."""

    def build(self):
        power = _db_to_power(self.p["power_db"])
        g = float(self.p.get("g", 0.9))
        rsum = float(self.p.get("rsum", 1.0))
        gamma = float(self.p.get("gamma", 1.0 / 16))
        strategy = self.p["strategy"]
        budget = int(self.p.get("budget", 60))
        points = int(self.p.get("points", 601))
        pj, w = _marton_design(strategy, power, g, budget,
                               int(self.p.get("search_seed", 0)), points)
        self.vch = VectorChannel2x2(_h_channel(g), w)
        a1, a2 = float(pj[1].sum()), float(pj[:, 1].sum())
        mix1 = self.vch.user_mixture(0, a2, p_joint=pj)
        mix2 = self.vch.user_mixture(1, a1, p_joint=pj.T)
        if strategy == "marton":
            i1 = hb(a1) - mix1.cond_entropy()
            i2 = sch._cond_entropy_x2_given_x1(pj) - mix2.cond_entropy()
            r1, r2 = _rate_split(rsum, i1, i2)
            self.scheme = sch.build_marton_gaussian(
                self.vch, pj, self.n, gamma, rates=(r1, r2))
            self.kind = "marton"
        else:
            u1 = self.vch.user_mixture(0, 0.5)
            u2 = self.vch.user_mixture(1, 0.5)
            r1, r2 = _rate_split(rsum, 1.0 - u1.cond_entropy(),
                                 1.0 - u2.cond_entropy())
            self.scheme = sch.build_symmetric_bc(self.vch, self.n, gamma,
                                                 rates=(r1, r2))
            self.mixes = (u1, u2)
            self.kind = "independent"

    def simulate(self, stream, count):
        rng = stream.child("chan").rng
        if self.kind == "marton":
            m1 = stream.child("m1").bits((count, self.scheme.asym1.msg_bits))
            m2 = stream.child("m2").bits((count, self.scheme.gp2.msg_bits))
            x1, x2 = self.scheme.encode(m1, m2, stream)
            ys = self.vch.sample(np.stack([x1, x2], axis=-1), rng)
            mh1 = self.scheme.decode1(ys[..., 0], stream)
            mh2 = self.scheme.decode2(ys[..., 1], stream)
        else:
            p1, p2 = self.scheme
            m1 = stream.child("m1").bits((count, p1.k))
            m2 = stream.child("m2").bits((count, p2.k))
            x1 = p1.encode(m1, stream)
            x2 = p2.encode(m2, stream)
            ys = self.vch.sample(np.stack([x1, x2], axis=-1), rng)
            mh1 = p1.decode(self.mixes[0].sym_llr(ys[..., 0], 0), stream)
            mh2 = p2.decode(self.mixes[1].sym_llr(ys[..., 1], 0), stream)
        bad = np.any(mh1 != m1, axis=1) | np.any(mh2 != m2, axis=1)
        return TrialStats(trials=count, errors=int(bad.sum()))


class CranDlKernel(Kernel):
    """Downlink relay network at a fixed sum rate; the axis sweeps the
    fronthaul capacity pair and the joint law is re-optimized per point."""

    def build(self):
        c1, c2 = (float(v) for v in self.p["caps"])
        power = _db_to_power(self.p.get("power_db", 4.0))
        g = float(self.p.get("g", 0.9))
        rsum = float(self.p.get("rsum", 0.75))
        gamma_r = float(self.p.get("gamma_r", 1.0 / 8))
        gamma_c = float(self.p.get("gamma_c", 5.0 / 32))
        budget = int(self.p.get("budget", 60))
        points = int(self.p.get("points", 401))
        spec = optim.SearchSpec([0.0] * 18, [1.0] * 18, method="genetic",
                                budget=budget,
                                seed=int(self.p.get("search_seed", 2)))
        # the relay compressors spend gamma_c of each fronthaul link, so
        # the input-law search must target the remaining capacity
        p4, lams, _ = optim.cran_dl_search(
            spec, max(c1 - gamma_c, 0.05), max(c2 - gamma_c, 0.05),
            power, g, points=points)
        self.vch = VectorChannel2x2(
            _h_channel(g), np.diag(np.sqrt(np.asarray(lams))))
        pu = p4.sum(axis=(2, 3))
        # capacity shares from the auxiliary-channel mutual informations
        pu1 = float(pu.sum(axis=1)[1])
        cond1 = [p4[u].sum(axis=0) / max(p4[u].sum(), 1e-300) for u in (0, 1)]
        mix1 = sch._mixture_from_cond(self.vch.eff[0], cond1, pu1)
        pu2 = float(pu.sum(axis=0)[1])
        cond2 = [p4[:, u].sum(axis=0) / max(p4[:, u].sum(), 1e-300)
                 for u in (0, 1)]
        mix2 = sch._mixture_from_cond(self.vch.eff[1], cond2, pu2)
        j21 = sch.joint_from_table(pu, input_axis=1)
        ia = hb(pu1) - mix1.cond_entropy()
        ib = j21.cond_entropy() - mix2.cond_entropy()
        r1, r2 = _rate_split(rsum, ia, ib)
        self.scheme = sch.CranDl.build(p4, self.vch, c1, c2, self.n,
                                       gamma_r, gamma_c, rates=(r1, r2))

    def simulate(self, stream, count):
        rng = stream.child("chan").rng
        dl = self.scheme
        m1 = stream.child("m1").bits((count, dl.asym1.msg_bits))
        m2 = stream.child("m2").bits((count, dl.gp2.msg_bits))
        (m3, m4), _ = dl.cp_encode(m1, m2, stream)
        x1 = dl.relay_sequence(0, m3, stream)
        x2 = dl.relay_sequence(1, m4, stream)
        ys = self.vch.sample(np.stack([x1, x2], axis=-1), rng)
        mh1 = dl.user_decode(0, ys[..., 0], stream)
        mh2 = dl.user_decode(1, ys[..., 1], stream)
        bad = np.any(mh1 != m1, axis=1) | np.any(mh2 != m2, axis=1)
        return TrialStats(trials=count, errors=int(bad.sum()))


class CranUlKernel(Kernel):
    """Uplink relay network with binary-quantized relays at a fixed sum
    rate; the axis sweeps the user power."""

    def build(self):
        power = _db_to_power(self.p["power_db"])
        g = float(self.p.get("g", 0.9))
        c1 = float(self.p.get("c1", 1.0))
        c2 = float(self.p.get("c2", 1.0))
        rsum = float(self.p.get("rsum", 0.25))
        gamma_r = float(self.p.get("gamma_r", 1.0 / 8))
        gamma_c = float(self.p.get("gamma_c", 5.0 / 32))
        budget = int(self.p.get("budget", 40))
        self.power, self.g = power, g
        # symmetric input laws keep the quantized relay bits unbiased,
        # which the relay compressors require
        spec = optim.SearchSpec([0.5, 0.5, 0.0, 0.5, 0.0, 0.5],
                                [0.5, 0.5, 0.45, 1.0, 0.45, 1.0],
                                method="genetic", budget=budget,
                                seed=int(self.p.get("search_seed", 2)))
        params, quants, _ = optim.cran_ul_search(spec, c1, c2, power, g)
        tests = np.asarray(params["tests"])
        # the symmetric input law puts the optimal boundary at zero; snap
        # the Lloyd-Max numerics so the quantized bits are exactly unbiased
        from .channels import Quantizer
        self.quants = tuple(
            Quantizer(np.where(np.abs(q.boundaries) < 0.02, 0.0,
                               q.boundaries), q.levels) for q in quants)
        quants = self.quants
        # scalar distortion of each test channel, averaged over its input
        table = params["table"]
        py = [table.sum(axis=(0, 1, 3, 4, 5)), table.sum(axis=(0, 1, 2, 5, 4))]
        ds = []
        for j, cap in enumerate((c1, c2)):
            flip = py[j][0] * tests[j][0] + py[j][1] * (1.0 - tests[j][1])
            d = min(max(float(flip), 0.01), 0.45)
            # the relay compressor spends hb(1/2) - hb(d) + gamma_c/2 per
            # symbol; floor the distortion so the rate fits the backhaul
            need = 1.0 - cap + gamma_c / 2 + 0.01
            if need > 0 and hb(d) < need:
                from scipy.optimize import brentq
                d = float(brentq(lambda t: hb(t) - need, 1e-9, 0.5 - 1e-12))
            ds.append(min(d, 0.45))
        r1, r2 = _rate_split(rsum, 1.0, 1.0)
        self.scheme = sch.build_cran_ul(
            float(params["p1"]), float(params["p2"]), power, g,
            quants[0], quants[1], ds[0], ds[1], c1, c2, self.n,
            gamma_r, gamma_c, rates=(r1, r2))

    def simulate(self, stream, count):
        rng = stream.child("chan").rng
        ul = self.scheme
        m1 = stream.child("m1").bits((count, ul.mac.asym1.msg_bits))
        m2 = stream.child("m2").bits((count, ul.mac.asym2.msg_bits))
        x1, x2 = ul.encode_users(m1, m2, stream)
        amp = float(np.sqrt(self.power))
        s1 = amp * (1.0 - 2.0 * x1.astype(float))
        s2 = amp * (1.0 - 2.0 * x2.astype(float))
        y1 = self.quants[0].quantize(s1 + self.g * s2
                                     + rng.normal(size=s1.shape))
        y2 = self.quants[1].quantize(s2 + self.g * s1
                                     + rng.normal(size=s2.shape))
        m3 = ul.relay_encode(0, y1.astype(np.uint8), stream)
        m4 = ul.relay_encode(1, y2.astype(np.uint8), stream)
        mh1, mh2 = ul.cp_decode(m3, m4, stream)
        bad = np.any(mh1 != m1, axis=1) | np.any(mh2 != m2, axis=1)
        return TrialStats(trials=count, errors=int(bad.sum()))


_KERNELS = {
    "sw_bsc": SwBscKernel,
    "p2p_bsc": P2pBscKernel,
    "brick_bsc": BrickBscKernel,
    "lossy": LossyKernel,
    "gp_gaussian": GpGaussianKernel,
    "gp_symmetric": GpSymmetricKernel,
    "marton": MartonKernel,
    "cran_dl": CranDlKernel,
    "cran_ul": CranUlKernel,
}


def build_kernel(cfg: ExperimentConfig, point) -> Kernel:
    if cfg.kernel not in _KERNELS:
        raise ConfigError(f"unknown trial kernel: {cfg.kernel}")
    return _KERNELS[cfg.kernel](cfg, point)


# ---------------------------------------------------------------------------
# the runner

@dataclass
class PointResult:
    index: int
    point: object
    stats: TrialStats
    rows: list


_WORKER_KERNEL = None


def _worker_init(cfg, point):
    global _WORKER_KERNEL
    _WORKER_KERNEL = build_kernel(cfg, point)


def _worker_batch(args):
    counter, count = args
    return _WORKER_KERNEL.simulate_counter(counter, count)


def _point_batches(cfg: ExperimentConfig, index: int):
    base = index * _COUNTER_STRIDE
    left, out, b = cfg.trials, [], 0
    while left > 0:
        count = min(BATCH, left)
        out.append((base + b, count))
        left -= count
        b += 1
    return out


def _run_point(cfg: ExperimentConfig, index: int, point, jobs: int):
    batches = _point_batches(cfg, index)
    stats = TrialStats()
    if jobs <= 1:
        kern = build_kernel(cfg, point)
        for counter, count in batches:
            stats = stats.merge(kern.simulate_counter(counter, count))
            if stats.errors >= EARLY_STOP_ERRORS:
                break
        return kern, stats
    # Workers build the kernel once each; batch results are consumed in
    # submission order so the early-stop boundary matches the serial run.
    kern = build_kernel(cfg, point)
    with concurrent.futures.ProcessPoolExecutor(
            max_workers=jobs, initializer=_worker_init,
            initargs=(cfg, point)) as ex:
        for part in ex.map(_worker_batch, batches):
            stats = stats.merge(part)
            if stats.errors >= EARLY_STOP_ERRORS:
                break
    return kern, stats


def run(cfg: ExperimentConfig, jobs: int = 1, writer=None,
        metric_suffix: str = ""):
    """Execute one sweep; returns a PointResult per axis value in order."""
    results = []
    for index, point in enumerate(cfg.axis):
        kern, stats = _run_point(cfg, index, point, jobs)
        rows = [(name + metric_suffix, v, lo, hi)
                for name, v, lo, hi in kern.rows(stats)]
        res = PointResult(index, point, stats, rows)
        results.append(res)
        if writer is not None:
            for name, v, lo, hi in rows:
                writer.write_row(point, name, v, lo, hi, stats.trials,
                                 cfg.seed)
    return results


# ---------------------------------------------------------------------------
# CSV and manifest plumbing

def _fmt(v) -> str:
    if isinstance(v, (tuple, list, np.ndarray)):
        return "|".join(_fmt(x) for x in v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.10g" % float(v)
    return str(v)


class CsvWriter:
    """Atomic CSV writer: rows accumulate in a temp file that is renamed
    onto the target path on close."""

    def __init__(self, path: str):
        self.path = os.path.abspath(path)
        out_dir = os.path.dirname(self.path) or "."
        os.makedirs(out_dir, exist_ok=True)
        fd, self._tmp = tempfile.mkstemp(dir=out_dir, suffix=".part")
        self._fh = os.fdopen(fd, "w")
        self._fh.write(CSV_HEADER + "\n")

    def write_row(self, axis, metric, value, ci_lo, ci_hi, trials, seed):
        self._fh.write(",".join([_fmt(axis), str(metric), _fmt(value),
                                 _fmt(ci_lo), _fmt(ci_hi), str(int(trials)),
                                 str(int(seed))]) + "\n")

    def close(self):
        self._fh.close()
        os.replace(self._tmp, self.path)

    def abort(self):
        self._fh.close()
        os.unlink(self._tmp)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self.abort()
        return False


def write_manifest(out_dir: str, csv_name: str, configs, seed: int):
    """Append a JSON-lines manifest entry (deduplicated) for one CSV."""
    entry = json.dumps({"file": csv_name,
                        "config_sha256": [c.digest() for c in configs],
                        "version": __version__,
                        "seed": int(seed)}, sort_keys=True)
    path = os.path.join(out_dir, "manifest.jsonl")
    lines = []
    if os.path.exists(path):
        with open(path) as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if entry not in lines:
        lines.append(entry)
    fd, tmp = tempfile.mkstemp(dir=out_dir, suffix=".part")
    with os.fdopen(fd, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def _campaign_io(out_dir, name, configs, seed):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    writer = CsvWriter(path)
    return path, writer


# ---------------------------------------------------------------------------
# campaigns

def threshold_crossing(xs, ys, level: float):
    """Log-linear interpolation of the first downward crossing of level."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    floor = 1e-12
    ly = np.log10(np.maximum(ys, floor))
    ll = np.log10(level)
    for i in range(1, len(xs)):
        if ys[i - 1] > level >= ys[i]:
            if ly[i - 1] == ly[i]:
                return float(xs[i])
            t = (ll - ly[i - 1]) / (ly[i] - ly[i - 1])
            return float(xs[i - 1] + t * (xs[i] - xs[i - 1]))
    return float("nan")


def campaign_lossy_rd(out_dir, theta=0.3, d=0.15, ns=(256, 1024, 4096),
                      gamma_e=1.0 / 8, gamma_s=0.0, trials=2000, seed=0,
                      jobs=1, csv_name="lossy_rd.csv"):
    """Rate-distortion convergence: fixed distortion target, growing n."""
    cfg = ExperimentConfig.make("lossy", "n", ns, max(ns), trials, seed,
                                theta=theta, d=d, gamma_s=gamma_s,
                                gamma_e=gamma_e)
    path, writer = _campaign_io(out_dir, csv_name, [cfg], seed)
    with writer:
        results = run(cfg, jobs=jobs, writer=writer)
    write_manifest(out_dir, csv_name, [cfg], seed)
    return path, results


def campaign_gp(out_dir, power_db=(2.0, 3.0, 4.0, 5.0, 6.0, 7.0), g=0.9,
                theta=0.1, n=1024, rate=0.5, gamma=3.0 / 16, trials=2000,
                seed=0, jobs=1, step=1.0 / 512, points=801, pxs=None,
                csv_name="gp.csv"):
    """State-channel coding gain: optimized-input coding with the state at
    the encoder versus a symmetric code for the state-averaged channel,
    plus the interpolated power where each crosses BLER 1e-2.

    ``pxs`` optionally fixes the input law (p(x=1|s=0), p(x=1|s=1)) for
    every power point instead of re-optimizing it per point."""
    common = dict(g=g, theta=theta, rate=rate, gamma=gamma)
    law = {} if pxs is None else {"pxs0": float(pxs[0]),
                                  "pxs1": float(pxs[1])}
    cfg_gp = ExperimentConfig.make("gp_gaussian", "power_db", power_db, n,
                                   trials, seed, step=step, points=points,
                                   **law, **common)
    cfg_sym = ExperimentConfig.make("gp_symmetric", "power_db", power_db, n,
                                    trials, seed, **common)
    path, writer = _campaign_io(out_dir, csv_name, [cfg_gp, cfg_sym], seed)
    with writer:
        res_gp = run(cfg_gp, jobs=jobs, writer=writer, metric_suffix="_gp")
        res_sym = run(cfg_sym, jobs=jobs, writer=writer, metric_suffix="_sym")
        for tagd, res in (("gp", res_gp), ("sym", res_sym)):
            cross = threshold_crossing([r.point for r in res],
                                       [r.stats.bler for r in res], 1e-2)
            writer.write_row("crossing", f"crossing_db_{tagd}", cross,
                             cross, cross, trials, seed)
    write_manifest(out_dir, csv_name, [cfg_gp, cfg_sym], seed)
    return path, {"gp": res_gp, "sym": res_sym}


def campaign_marton(out_dir, power_db=(7.0,), strategies=MARTON_STRATEGIES,
                    g=0.9, n=512, rsum=1.0, gamma=1.0 / 16, trials=2000,
                    seed=0, jobs=1, budget=150, points=601,
                    csv_name="marton.csv"):
    """Broadcast strategies at a fixed sum rate across a power grid."""
    configs, out = [], {}
    path, writer = _campaign_io(out_dir, csv_name, [], seed)
    with writer:
        for strat in strategies:
            cfg = ExperimentConfig.make("marton", "power_db", power_db, n,
                                        trials, seed, strategy=strat, g=g,
                                        rsum=rsum, gamma=gamma, budget=budget,
                                        points=points)
            configs.append(cfg)
            out[strat] = run(cfg, jobs=jobs, writer=writer,
                             metric_suffix=f"_{strat}")
    write_manifest(out_dir, csv_name, configs, seed)
    return path, out


def campaign_cran_dl(out_dir, cap_pairs=((0.5, 0.5), (0.75, 0.75), (1.0, 1.0)),
                     power_db=5.0, g=0.9, n=512, rsum=0.75,
                     gamma_r=1.0 / 8, gamma_c=5.0 / 32, trials=2000, seed=0,
                     jobs=1, budget=60, points=401, csv_name="cran_dl.csv"):
    """Downlink relay network across fronthaul capacity pairs."""
    cfg = ExperimentConfig.make("cran_dl", "caps", tuple(cap_pairs), n,
                                trials, seed, power_db=power_db, g=g,
                                rsum=rsum, gamma_r=gamma_r, gamma_c=gamma_c,
                                budget=budget, points=points)
    path, writer = _campaign_io(out_dir, csv_name, [cfg], seed)
    with writer:
        results = run(cfg, jobs=jobs, writer=writer)
    write_manifest(out_dir, csv_name, [cfg], seed)
    return path, results


def campaign_cran_ul(out_dir, power_db=(3.0, 6.0, 9.0), c1=0.5, c2=0.5,
                     g=0.9, n=512, rsum=0.25, gamma_r=1.0 / 8,
                     gamma_c=5.0 / 32, trials=2000, seed=0, jobs=1,
                     budget=40, relaxed_caps=8.0, csv_name="cran_ul.csv"):
    """Uplink relay network across user power, with a capacity-relaxed
    control run that isolates the quantization/compression error floor."""
    cfg = ExperimentConfig.make("cran_ul", "power_db", power_db, n, trials,
                                seed, c1=c1, c2=c2, g=g, rsum=rsum,
                                gamma_r=gamma_r, gamma_c=gamma_c,
                                budget=budget)
    cfg_rel = ExperimentConfig.make("cran_ul", "power_db", power_db, n,
                                    trials, seed, c1=relaxed_caps,
                                    c2=relaxed_caps, g=g, rsum=rsum,
                                    gamma_r=gamma_r, gamma_c=gamma_c,
                                    budget=budget)
    path, writer = _campaign_io(out_dir, csv_name, [cfg, cfg_rel], seed)
    with writer:
        res = run(cfg, jobs=jobs, writer=writer)
        res_rel = run(cfg_rel, jobs=jobs, writer=writer,
                      metric_suffix="_relaxed")
    write_manifest(out_dir, csv_name, [cfg, cfg_rel], seed)
    return path, {"fixed": res, "relaxed": res_rel}
