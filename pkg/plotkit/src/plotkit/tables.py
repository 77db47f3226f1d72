"""Reader for campaign result CSVs.

Every figure consumes the same seven-column sweep schema::

    axis,metric,value,ci_lo,ci_hi,trials,seed

``axis`` is kept as text because campaigns append summary rows (for
example interpolated threshold crossings) whose axis field is a label
rather than a number; numeric filtering happens per figure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

REQUIRED_COLUMNS = ("axis", "metric", "value", "ci_lo", "ci_hi",
                    "trials", "seed")


class SchemaMismatch(Exception):
    """A CSV does not carry the sweep schema.

    Parameters
    ----------
    path : str
        Offending file.
    missing : sequence of str
        Required columns absent from the header (all of them when the
        file is empty).
    """

    def __init__(self, path: str, missing):
        self.path = str(path)
        self.missing = tuple(missing)
        super().__init__(f"{self.path}: missing columns: "
                         + ", ".join(self.missing))


@dataclass(frozen=True)
class Row:
    """One sweep measurement; ``axis`` stays textual until filtered."""

    axis: str
    metric: str
    value: float
    ci_lo: float
    ci_hi: float
    trials: int
    seed: int

    def axis_value(self):
        """Axis as a float, or ``None`` for label rows."""
        try:
            return float(self.axis)
        except ValueError:
            return None


def load_table(path: str) -> list[Row]:
    """Parse one CSV into rows, validating the header first.

    Raises
    ------
    SchemaMismatch
        If the file is empty or the header lacks required columns.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaMismatch(path, REQUIRED_COLUMNS)
        fields = [h.strip() for h in header]
        missing = [c for c in REQUIRED_COLUMNS if c not in fields]
        if missing:
            raise SchemaMismatch(path, missing)
        idx = {c: fields.index(c) for c in REQUIRED_COLUMNS}
        rows = []
        for rec in reader:
            if not rec:
                continue
            rows.append(Row(axis=rec[idx["axis"]],
                            metric=rec[idx["metric"]],
                            value=float(rec[idx["value"]]),
                            ci_lo=float(rec[idx["ci_lo"]]),
                            ci_hi=float(rec[idx["ci_hi"]]),
                            trials=int(rec[idx["trials"]]),
                            seed=int(rec[idx["seed"]])))
    return rows


def series(rows, prefix: str):
    """Group numeric-axis rows whose metric starts with ``prefix``.

    Returns
    -------
    dict
        Metric name -> list of rows sorted by axis value.
    """
    out: dict[str, list[Row]] = {}
    for row in rows:
        if row.metric.startswith(prefix) and row.axis_value() is not None:
            out.setdefault(row.metric, []).append(row)
    for name in out:
        out[name].sort(key=lambda r: r.axis_value())
    return out
