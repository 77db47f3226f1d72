"""Standalone entry point: a plot-spec file plus optional CSV paths.

Usage::

    plotkit spec.json [extra.csv ...] [--out figure.svg]

CSV paths given on the command line are appended to the spec's list;
``--out`` overrides the spec's output path.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .figures import PlotSpec, render
from .tables import SchemaMismatch


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render a campaign sweep CSV into a figure image.")
    parser.add_argument("spec", help="JSON plot-spec file")
    parser.add_argument("csvs", nargs="*",
                        help="additional sweep CSVs to draw")
    parser.add_argument("--out", default=None,
                        help="output image path (overrides the spec)")
    args = parser.parse_args(argv)
    try:
        spec = PlotSpec.from_file(args.spec)
        if args.csvs or args.out:
            spec = dataclasses.replace(
                spec,
                csvs=spec.csvs + tuple(args.csvs),
                out=args.out if args.out else spec.out)
        path = render(spec)
    except (SchemaMismatch, ValueError, OSError,
            KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
