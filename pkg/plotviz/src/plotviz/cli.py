"""plotviz command line: bench CSV in, figure file out."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, MalformedCsvError, MissingSeriesError, PlotSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plotviz",
        description="Render resamplab-bench results.csv as a figure.",
    )
    parser.add_argument("--csv", required=True, help="results.csv produced by resamplab-bench")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--series", required=True,
                        help="comma-separated selectors: scheme pairs (a/b) for "
                             "variance-ratio, scheme@phi for rate-loglog")
    parser.add_argument("--out", required=True, help="output image path (.png or .svg)")
    args = parser.parse_args(argv)

    series = tuple(s for s in (part.strip() for part in args.series.split(",")) if s)
    try:
        spec = PlotSpec(csv_path=args.csv, kind=args.kind, series=series, out_path=args.out)
        render(spec)
    except (MissingSeriesError, MalformedCsvError, ValueError) as exc:
        print(f"plotviz: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
