"""``plot``: render summary CSVs into a convergence figure.

Exit codes: 0 success, 2 schema/usage error.
"""
from __future__ import annotations

import argparse
import sys

from .render import PlotSpec, SchemaError, render

EXIT_SCHEMA = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plot", description=__doc__)
    parser.add_argument("--csv", nargs="+", required=True, help="summary CSV paths")
    parser.add_argument("--band", type=float, default=0.2, help="band width in standard deviations")
    parser.add_argument("--out", required=True, help="output image path (.png default, .svg for vector)")
    parser.add_argument("--xlabel", default="number of queries")
    parser.add_argument("--ylabel", default="best observed value")
    parser.add_argument("--title", default=None)
    parser.add_argument("--vector", action="store_true", help="write vector (SVG) output")
    parser.add_argument("--algorithms", nargs="*", default=None, help="subset/order of algorithms to draw")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = PlotSpec(
            csv_paths=args.csv,
            band_multiplier=args.band,
            xlabel=args.xlabel,
            ylabel=args.ylabel,
            title=args.title,
            out_path=args.out,
            vector=args.vector,
            algorithms=args.algorithms or [],
        )
        render(spec)
    except (SchemaError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
