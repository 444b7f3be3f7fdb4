"""Figure entry point.

    plot <kind> <in.csv> <out.png> [--ref-exponent -1]

Kinds: gen_scatter, trajectory_fan, loss_hist.
"""

from __future__ import annotations

import argparse
import sys

from .figures import FigureSpec, SchemaError, plot


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plot", description=__doc__)
    parser.add_argument("kind", choices=("gen_scatter", "trajectory_fan",
                                         "loss_hist"))
    parser.add_argument("input_csv")
    parser.add_argument("output_image")
    parser.add_argument("--ref-exponent", type=float, default=-1.0,
                        help="reference-line exponent for gen_scatter")
    args = parser.parse_args(argv)

    options = {}
    if args.kind == "gen_scatter":
        options["ref_exponent"] = args.ref_exponent
    try:
        plot(FigureSpec(args.kind, args.input_csv, args.output_image, options))
    except (OSError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
