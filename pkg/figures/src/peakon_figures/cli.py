"""Command line: render run-directory files into an image.

Usage:
    peakonfigs render --traj FILE [--overlay FILE] [--events FILE]
                      --out FILE.png|FILE.svg [options]

Exit codes: 0 on success, 2 on malformed input or bad arguments.
"""

from __future__ import annotations

import argparse
import sys

from peakon_figures.io import MalformedInputError
from peakon_figures.render import FigureSpec, TIME_AXES, render

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peakonfigs",
        description="Batch figure rendering for trajectory CSVs and event logs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="draw one figure from run files")
    p.add_argument("--traj", required=True, help="primary trajectory CSV")
    p.add_argument("--overlay", default=None,
                   help="reference trajectory CSV drawn dashed")
    p.add_argument("--events", default=None,
                   help="event-log JSON; drawn as markers on the primary run")
    p.add_argument("--out", required=True, help="output image (.png or .svg)")
    p.add_argument("--time-axis", choices=TIME_AXES, default="vertical",
                   help="axis carrying time (default: vertical)")
    p.add_argument("--title", default=None)
    p.add_argument("--label", default="smoothed run",
                   help="legend label for the primary run")
    p.add_argument("--overlay-label", default="reference",
                   help="legend label for the overlay run")
    p.add_argument("--x-range", nargs=2, type=float, default=None,
                   metavar=("LO", "HI"))
    p.add_argument("--t-range", nargs=2, type=float, default=None,
                   metavar=("LO", "HI"))
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    spec = FigureSpec(
        traj_path=args.traj,
        out_path=args.out,
        overlay_path=args.overlay,
        events_path=args.events,
        time_axis=args.time_axis,
        x_range=tuple(args.x_range) if args.x_range else None,
        t_range=tuple(args.t_range) if args.t_range else None,
        title=args.title,
        label=args.label,
        overlay_label=args.overlay_label,
    )
    try:
        result = render(spec)
    except (MalformedInputError, ValueError, OSError) as exc:
        print(f"peakonfigs: error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {result.out_path} "
          f"({result.primary.n_curves} curves, {result.marker_count} markers)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
