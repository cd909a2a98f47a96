"""render CLI: training-curve figures from metrics CSVs."""

from __future__ import annotations

import argparse
import sys

from .render import CurveSpec, SchemaError, render_curves


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render", description="Plot accuracy-vs-epoch curves from metrics CSVs."
    )
    parser.add_argument("--csv", action="append", required=True,
                        help="metrics CSV (repeat per run)")
    parser.add_argument("--label", action="append", required=True,
                        help="legend label (repeat per run, same order)")
    parser.add_argument("--out", required=True, help="output image path (.png)")
    parser.add_argument("--title", default="Test accuracy")
    args = parser.parse_args(argv)
    try:
        spec = CurveSpec(args.csv, args.label, args.out, args.title)
        for path in render_curves(spec):
            print(f"wrote {path}")
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
