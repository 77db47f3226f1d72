"""Command-line interface: exhaustive machine checks, Monte-Carlo
campaigns, input-law optimization, and shaping-spectrum estimation.

Subcommands exit 0 on success, 1 when a machine check fails, and 2 on
usage or configuration errors. All artifacts are written atomically
(temp file + rename) inside the declared output location, and every
subcommand is deterministic given identical inputs and seeds.
"""

from __future__ import annotations

import inspect
import os
import sys
import tempfile

import click
import numpy as np
import yaml

from . import blockmarkov as bm
from . import bricks as bk
from . import gf2core as g2
from . import harness as hz
from . import optim
from . import polarbrick as pb
from . import schemes as sch
from .channels import Dmc, JointSource, StateChannel, hb, symmetrize


class CheckFailure(Exception):
    """A machine check found a violated identity."""


def _require(cond, msg: str):
    if not cond:
        raise CheckFailure(msg)


def _random_full_rank(rng, r: int, n: int) -> g2.BitMatrix:
    while True:
        arr = rng.integers(0, 2, size=(r, n), dtype=np.uint8)
        m = g2.BitMatrix.from_array(arr)
        if g2.rank(m) == r:
            return m


# ---------------------------------------------------------------------------
# selftest checks
#
# Each check exhausts a small instance of one of the library's exact
# algebraic guarantees; together they cover the coset normal form, the
# coset product law, the stacked-syndrome index identities, and the
# shaping-chain total-variation bound.

def _check_lemma1_coset_normal_form():
    """Coset shifts, syndromes, and uniform codewords of random full-rank
    parity checks satisfy the defining normal-form identities."""
    rng = np.random.default_rng(101)
    for trial in range(24):
        n = int(rng.integers(3, 11))
        r = int(rng.integers(1, n))
        h = _random_full_rank(rng, r, n)
        pc = g2.normalize(h)
        h_raw = h.to_array().astype(int)
        label = f"code {r}x{n} (trial {trial})"
        xs = rng.integers(0, 2, size=(8, n), dtype=np.uint8)
        ts = pc.syndrome_batch(xs)
        _require(np.array_equal(ts, (xs.astype(int) @ h_raw.T) % 2),
                 f"syndrome disagrees with direct arithmetic on {label}")
        sh = pc.shift_orig_batch(xs)
        _require(not (((xs ^ sh).astype(int) @ h_raw.T) % 2).any(),
                 f"x ^ shift(x) is not a codeword on {label}")
        _require(not sh[:, pc.info_cols].any(),
                 f"shift is nonzero on information coordinates on {label}")
        _require(np.array_equal(pc.syndrome_batch(sh), ts),
                 f"shift does not reproduce the syndrome on {label}")
        us = rng.integers(0, 2, size=(8, pc.k), dtype=np.uint8)
        cs = pc.encode_orig_batch(us)
        _require(not ((cs.astype(int) @ h_raw.T) % 2).any(),
                 f"encoded words leave the code on {label}")
        _require(np.array_equal(pc.info_bits_batch(cs), us),
                 f"information bits do not round-trip on {label}")


def _check_lemma2_product_law():
    """The exact law of U = C + shift(X) factors into the product of the
    uniform codeword law and the source, for small codes and sources."""
    rng = np.random.default_rng(102)
    cases = [
        ((1, 2), JointSource.from_factored(0.5, Dmc.bsc(0.1))),
        ((2, 4), JointSource.from_factored(0.3, Dmc.bsc(0.15))),
        ((3, 6), JointSource.degenerate(0.2)),
    ]
    for (r, n), joint in cases:
        pc = g2.normalize(_random_full_rank(rng, r, n))
        tv = bk.check_lemma2_exact(pc, joint)
        _require(tv < 1e-12,
                 f"product-law TV {tv:.3g} on a {r}x{n} code")


def _check_lemma3_index_identities():
    """Conveyed compression/message indices coincide with the stacked
    syndromes of the shaped and channel-input sequences."""
    # lossy encoder: message ++ dither syndrome == stacked syndrome of u
    scheme = sch.LossyAsym.for_source(0.3, 0.1, 64, 1.0 / 8, 1.0 / 8)
    wz = scheme.wz
    rng = np.random.default_rng(103)
    xs = (rng.random((30, 64)) < 0.3).astype(np.uint8)
    ms, u = wz.encode_full(xs, sch.DitherStream(9))
    v = sch.DitherStream(9).child(wz.tag + ".v").bits(xs.shape)
    _require(np.array_equal(sch.u_syndrome(wz.pair.outer, u),
                            sch.u_syndrome(wz.pair.outer, v)),
             "shaped sequence left the dither's coset (lossy encoder)")
    _require(np.array_equal(pb.polar_transform(u)[:, wz.pair.extra], ms),
             "conveyed index differs from the shaped sequence's syndrome")
    # channel encoder with state: transform of x stacks [dither, message]
    joint = JointSource.from_factored(0.35, Dmc.bsc(0.05))
    asym = sch.AsymChannel.build(joint, 0.35, 64, 1.0 / 4, 1.0 / 8)
    gp = asym.gp
    ms2 = rng.integers(0, 2, size=(30, gp.msg_bits), dtype=np.uint8)
    x = asym.encode(ms2, sch.DitherStream(13))
    v1 = sch.DitherStream(13).child(gp.tag + ".v1").bits(
        (30, gp.n - gp.k1))
    tx = pb.polar_transform(x)
    _require(np.array_equal(tx[:, ~gp.pair.outer.info_mask], v1),
             "channel input's frozen coordinates differ from the dither")
    _require(np.array_equal(tx[:, gp.pair.extra], ms2),
             "channel input's message coordinates differ from the message")


def _uy_law_tv(brick_p2p, joint):
    """Exact TV between the law of (U, Y) from the shaping chain
    U = decode(Y, V) + V and the i.i.d. source joint."""
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


def _check_lemma4_shaping_tv():
    """The (U, Y) law of the shaping chain is within the brick's exact
    shaping distance of the i.i.d. joint, for hard and sampling decoders."""
    joint = JointSource.from_factored(0.5, Dmc.bsc(0.2))
    sym = symmetrize(joint)
    for mode in ("hard", "shaping"):
        b = bk.BrickP2P.from_polar(pb.construct(sym, 2, 4, mode=mode))
        delta = bk.exact_shaping_distance(b, sym)
        tv = _uy_law_tv(b, joint)
        _require(tv <= delta + 1e-9,
                 f"chain TV {tv:.6f} exceeds shaping distance {delta:.6f}"
                 f" in {mode} mode")
    # the posterior-sampling decoder must strictly improve on hard decisions
    hard = bk.BrickP2P.from_polar(pb.construct(sym, 2, 4, mode="hard"))
    soft = bk.BrickP2P.from_polar(pb.construct(sym, 2, 4, mode="shaping"))
    d_hard = bk.exact_shaping_distance(hard, sym)
    d_soft = bk.exact_shaping_distance(soft, sym)
    _require(d_soft < d_hard,
             f"sampling decoder distance {d_soft:.6f} is not below the"
             f" hard decoder's {d_hard:.6f}")


_CHECKS = {
    "lemma1-coset-normal-form": _check_lemma1_coset_normal_form,
    "lemma2-product-law": _check_lemma2_product_law,
    "lemma3-index-identities": _check_lemma3_index_identities,
    "lemma4-shaping-tv": _check_lemma4_shaping_tv,
}


# ---------------------------------------------------------------------------
# configuration plumbing

_CAMPAIGNS = {
    "lossy_rd": hz.campaign_lossy_rd,
    "gp": hz.campaign_gp,
    "marton": hz.campaign_marton,
    "cran_dl": hz.campaign_cran_dl,
    "cran_ul": hz.campaign_cran_ul,
}


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else path
        raise click.UsageError(f"{where}: {e}")
    if not isinstance(doc, dict):
        raise click.UsageError(f"{path}: config must be a key/value tree")
    return doc


def _tupled(v):
    if isinstance(v, list):
        return tuple(_tupled(x) for x in v)
    return v


def _atomic_write(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".part")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# commands

@click.group()
def main():
    """Network coding schemes from point-to-point bricks: machine checks,
    Monte-Carlo campaigns, and design-stage optimizers."""


@main.command()
@click.option("--filter", "pattern", default="",
              help="Run only checks whose name contains this substring.")
def selftest(pattern):
    """Run the exhaustive machine checks of the library's exact identities."""
    names = [name for name in _CHECKS if pattern in name]
    if not names:
        raise click.UsageError(f"no check matches filter {pattern!r};"
                               f" available: {', '.join(_CHECKS)}")
    failed = 0
    for name in names:
        try:
            _CHECKS[name]()
        except CheckFailure as e:
            failed += 1
            click.echo(f"FAIL {name}: {e}")
        except Exception as e:  # a crash is also a failed check
            failed += 1
            click.echo(f"FAIL {name}: unexpected {e!r}")
        else:
            click.echo(f"ok   {name}")
    click.echo(f"{len(names) - failed}/{len(names)} checks passed")
    sys.exit(1 if failed else 0)


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Campaign configuration file (key/value tree).")
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Output directory for CSV files and the manifest.")
@click.option("--seed", type=int, default=None,
              help="Override the config's master seed.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Worker processes per sweep point.")
def run(config_path, out_dir, seed, jobs):
    """Run a Monte-Carlo campaign described by a config file."""
    if jobs < 1:
        raise click.UsageError("--jobs must be at least 1")
    doc = _load_config(config_path)
    name = doc.get("campaign")
    if name not in _CAMPAIGNS:
        raise click.UsageError(
            f"{config_path}: unknown campaign {name!r};"
            f" available: {', '.join(_CAMPAIGNS)}")
    fn = _CAMPAIGNS[name]
    allowed = set(inspect.signature(fn).parameters) - {"out_dir", "jobs"}
    kwargs = {}
    for section in ("model", "harness"):
        for key, value in (doc.get(section) or {}).items():
            if key not in allowed:
                raise click.UsageError(
                    f"{config_path}: unknown key {key!r} in section"
                    f" {section!r} for campaign {name!r}")
            kwargs[key] = _tupled(value)
    law = doc.get("input_law") or {}
    if law:
        if name != "gp" or "p_x_given_s" not in law:
            raise click.UsageError(
                f"{config_path}: input_law is only consumed by the gp"
                " campaign and needs a p_x_given_s entry")
        kwargs["pxs"] = tuple(float(v) for v in law["p_x_given_s"])
    if seed is not None:
        kwargs["seed"] = seed
    path, _ = fn(out_dir, jobs=jobs, **kwargs)
    click.echo(f"wrote {path}")


@main.command()
@click.argument("subject", type=click.Choice(["gp"]))
@click.option("--model", "model_kv", default="",
              help="Comma-separated key=value model parameters"
                   " (g, theta, power_db, step, points).")
@click.option("--out", "out_path", default=None, type=click.Path(),
              help="Write the snippet to this file instead of stdout.")
def optimize(subject, model_kv, out_path):
    """Optimize a design-stage input law and emit a config snippet."""
    params = {"g": 0.9, "theta": 0.1, "power_db": 4.0}
    for item in filter(None, model_kv.split(",")):
        if "=" not in item:
            raise click.UsageError(f"--model entry {item!r} is not key=value")
        key, _, value = item.partition("=")
        if key not in ("g", "theta", "power_db", "step", "points"):
            raise click.UsageError(f"unknown model parameter {key!r}")
        params[key] = float(value)
    ch = StateChannel(10.0 ** (params["power_db"] / 10.0), params["g"],
                      params["theta"])
    pxs, value = optim.gp_target(
        ch, step=float(params.get("step", 1.0 / 512)),
        points=int(params.get("points", 801)))
    snippet = {
        "campaign": "gp",
        "model": {"g": params["g"], "theta": params["theta"],
                  "power_db": [params["power_db"]]},
        "input_law": {"p_x_given_s": [float(pxs[0]), float(pxs[1])],
                      "achievable_rate": float(value)},
    }
    text = yaml.safe_dump(snippet, sort_keys=False)
    if out_path is None:
        click.echo(text, nl=False)
    else:
        _atomic_write(out_path, text)
        click.echo(f"wrote {out_path}")


@main.command()
@click.option("--alpha", type=float, required=True,
              help="Target Bernoulli bias of the shaped sequence.")
@click.option("--n", type=int, default=1024, show_default=True)
@click.option("--gamma", type=float, default=1.0 / 16, show_default=True,
              help="Rate backoff of the shaping brick above 1 - H(alpha).")
@click.option("--trials", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Output directory for the histogram CSV.")
def spectrum(alpha, n, gamma, trials, seed, out_dir):
    """Estimate the shaping Hamming-distance spectrum of one brick."""
    if not 0.0 < alpha < 0.5:
        raise click.UsageError("--alpha must lie in (0, 0.5)")
    if trials < 1:
        raise click.UsageError("--trials must be positive")
    k = sch._dims(n, 1.0 - hb(alpha) + gamma)
    brick = pb.construct(Dmc.bsc(alpha), k, n, mode="shaping")
    spec = bm.SpectrumW.estimate(brick, trials,
                                 np.random.default_rng(seed))
    tv = bm.tv_w_vs_binom(spec, alpha)
    lines = ["w,count"] + [f"{w},{int(c)}"
                           for w, c in enumerate(spec.counts)]
    path = os.path.join(out_dir, "spectrum.csv")
    _atomic_write(path, "\n".join(lines) + "\n")
    click.echo(f"wrote {path}")
    click.echo(f"tv_vs_binom {tv:.6f} (alpha={alpha}, n={n}, k={k},"
               f" trials={trials})")


if __name__ == "__main__":
    main()
