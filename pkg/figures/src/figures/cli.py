"""Command-line entry point: ``figures <kind> --in CSV... --out IMAGE``."""

from __future__ import annotations

import argparse
import sys

from .errors import FigureError
from .render import KINDS, FigureSpec, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figures",
        description="Render figures from simulator CSV outputs.",
    )
    parser.add_argument("kind", choices=KINDS, help="figure kind to render")
    parser.add_argument(
        "--in",
        dest="inputs",
        nargs="+",
        required=True,
        metavar="CSV",
        help="input CSV file(s)",
    )
    parser.add_argument("--out", required=True, metavar="IMAGE", help="output image path")
    parser.add_argument("--xlabel", default="n", help="x-axis label")
    parser.add_argument("--ylabel", default="value", help="y-axis label")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = FigureSpec(
            inputs=tuple(args.inputs),
            kind=args.kind,
            output=args.out,
            xlabel=args.xlabel,
            ylabel=args.ylabel,
        )
        render(spec)
    except FigureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
