"""Script entry point: one figure per invocation, spec given as flags."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figplots", description="Render simulator CSV outputs as figures."
    )
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--input", required=True, action="append",
                        help="input data file (repeatable)")
    parser.add_argument("--out", required=True, help="output image (.png or .svg)")
    parser.add_argument("--fit", default=None, help="fit summary JSON (collapse)")
    parser.add_argument("--title", default="")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = PlotSpec(kind=args.kind, inputs=args.input, out=args.out,
                        fit=args.fit, title=args.title)
        path = render(spec)
    except (SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
