"""Figure kinds and the render entry point.

All kinds read the same sweep schema (see :mod:`plotkit.tables`) and
emit a single SVG or PNG. Rendering is deterministic: the Agg backend
is forced, the SVG id salt is fixed, glyphs are embedded as paths, and
no timestamp metadata is written, so identical inputs produce identical
bytes.
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import overlays, tables  # noqa: E402

KINDS = ("rd_curve", "bler_curve", "rate_vs_power", "capacity_family")

_RC = {
    "svg.hashsalt": "plotkit",
    "svg.fonttype": "path",
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


@dataclasses.dataclass(frozen=True)
class PlotSpec:
    """One figure request.

    Parameters
    ----------
    csvs : tuple of str
        Input sweep CSVs; every one must parse against the schema.
    kind : str
        One of ``rd_curve``, ``bler_curve``, ``rate_vs_power``,
        ``capacity_family``.
    out : str
        Output image path; the extension selects SVG or PNG.
    title, xlabel, ylabel : str
        Axis decoration; empty strings fall back to per-kind defaults.
    overlay : dict
        Closed-form reference parameters. ``{"theta": t}`` draws the
        rate-distortion curve on ``rd_curve``; ``{"g": g, "theta": t}``
        draws the state-aware/state-blind rate pair on the power-axis
        kinds. Empty dict disables overlays.
    threshold : float
        Horizontal rule drawn by ``bler_curve``.
    """

    csvs: tuple
    kind: str
    out: str
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    overlay: dict = dataclasses.field(default_factory=dict)
    threshold: float = 1e-2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"expected one of {', '.join(KINDS)}")
        if not self.csvs:
            raise ValueError("spec lists no input CSVs")

    @classmethod
    def from_file(cls, path: str) -> "PlotSpec":
        """Load a spec from a JSON file with the field names above."""
        with open(path) as fh:
            doc = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"{path}: unknown spec keys: "
                             + ", ".join(sorted(extra)))
        if "csvs" in doc:
            doc["csvs"] = tuple(doc["csvs"])
        return cls(**doc)


def _label(csv_path: str, metric: str, many_csvs: bool) -> str:
    name = os.path.splitext(os.path.basename(csv_path))[0]
    return f"{name}:{metric}" if many_csvs else metric


def _errbars(rows):
    """Asymmetric CI half-widths clipped at zero for error bars."""
    lo = [max(r.value - r.ci_lo, 0.0) for r in rows]
    hi = [max(r.ci_hi - r.value, 0.0) for r in rows]
    return [lo, hi]


def _draw_rd(ax, loaded, spec):
    for path, rows in loaded:
        rates = tables.series(rows, "rate")
        dists = tables.series(rows, "distortion")
        # pair rate_<tag> with distortion_<tag> through the shared tag
        for name, rrows in sorted(rates.items()):
            tag = name[len("rate"):]
            drows = dists.get("distortion" + tag)
            if drows is None or name == "rate_gap":
                continue
            by_axis = {r.axis: r for r in drows}
            pts = [(by_axis[r.axis], r) for r in rrows if r.axis in by_axis]
            if not pts:
                continue
            xs = [d.value for d, _ in pts]
            ys = [r.value for _, r in pts]
            xerr = _errbars([d for d, _ in pts])
            ax.errorbar(xs, ys, xerr=xerr, marker="o", capsize=3,
                        label=_label(path, tag.lstrip("_") or "measured",
                                     len(loaded) > 1))
    theta = spec.overlay.get("theta")
    if theta is not None:
        ds = [0.005 + 0.005 * i for i in range(int(theta / 0.005))]
        ax.plot(ds, overlays.rate_distortion(theta, ds), "k--",
                label=f"R(D), theta={theta:g}")
    ax.set_xlabel(spec.xlabel or "distortion")
    ax.set_ylabel(spec.ylabel or "rate (bits/symbol)")


def _draw_lines(ax, loaded, spec, prefix, logy, default_ylabel):
    for path, rows in loaded:
        for name, srows in sorted(tables.series(rows, prefix).items()):
            if name == "rate_gap":
                continue
            xs = [r.axis_value() for r in srows]
            ys = [max(r.value, 1e-12) if logy else r.value for r in srows]
            ax.errorbar(xs, ys, yerr=_errbars(srows), marker="o",
                        capsize=3, label=_label(path, name,
                                                len(loaded) > 1))
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(spec.xlabel or "power (dB)")
    ax.set_ylabel(spec.ylabel or default_ylabel)


def _draw_capacity_overlay(ax, loaded, spec):
    g, theta = spec.overlay.get("g"), spec.overlay.get("theta")
    if g is None or theta is None:
        return
    dbs = sorted({r.axis_value() for _, rows in loaded for r in rows
                  if r.axis_value() is not None})
    if not dbs:
        return
    c_opt, c_sym = overlays.state_capacities(dbs, g, theta)
    ax.plot(dbs, c_opt, "k--", label="state-aware rate")
    ax.plot(dbs, c_sym, "k:", label="state-blind rate")


def render(spec: PlotSpec) -> str:
    """Render one figure; returns the output path.

    Every input CSV is parsed and validated before any output file is
    created, so a :class:`~plotkit.tables.SchemaMismatch` leaves the
    filesystem untouched.
    """
    loaded = [(path, tables.load_table(path)) for path in spec.csvs]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        try:
            if spec.kind == "rd_curve":
                _draw_rd(ax, loaded, spec)
            elif spec.kind == "bler_curve":
                _draw_lines(ax, loaded, spec, "bler", True, "block error rate")
                ax.axhline(spec.threshold, color="red", linestyle="--",
                           linewidth=1,
                           label=f"threshold {spec.threshold:g}")
            elif spec.kind == "rate_vs_power":
                _draw_lines(ax, loaded, spec, "rate", False,
                            "rate (bits/symbol)")
                _draw_capacity_overlay(ax, loaded, spec)
            else:  # capacity_family
                _draw_lines(ax, loaded, spec, "", False, "rate (bits/symbol)")
                _draw_capacity_overlay(ax, loaded, spec)
            if spec.title:
                ax.set_title(spec.title)
            ax.legend(loc="best", fontsize=8)
            fig.tight_layout()
            _save_atomic(fig, spec.out)
        finally:
            plt.close(fig)
    return spec.out


def _save_atomic(fig, out: str):
    """Write the image next to its destination, then move into place."""
    ext = os.path.splitext(out)[1].lower().lstrip(".") or "svg"
    if ext not in ("svg", "png"):
        raise ValueError(f"unsupported image format {ext!r}; use svg or png")
    out_dir = os.path.dirname(os.path.abspath(out))
    os.makedirs(out_dir, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out_dir, suffix=".part")
    try:
        # SVG embeds a creation date by default; suppress it so the
        # same inputs always give the same bytes
        meta = {"Date": None} if ext == "svg" else None
        with os.fdopen(fd, "wb") as fh:
            fig.savefig(fh, format=ext, metadata=meta)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
