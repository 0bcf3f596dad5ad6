"""Command line: plots <kind> --in <paths...> --out <image> [--title ...]."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotJob, render


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="plots", description=__doc__)
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--in", dest="inputs", nargs="+", required=True, help="input CSV/snapshot files")
    ap.add_argument("--out", dest="output", required=True, help="output image path")
    ap.add_argument("--title", default="")
    args = ap.parse_args(argv)
    try:
        result = render(PlotJob(kind=args.kind, inputs=args.inputs, output=args.output, title=args.title))
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    detail = f", {result.panels} panels" if args.kind == "heatmap_grid" else ""
    if result.slopes:
        detail = ", slopes " + " ".join(f"{v:.3f}" for v in result.slopes.values())
    print(f"wrote {result.path}{detail}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
