"""east-plot: render trajectory and metric figures from run logs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import logdata, render


def main(argv=None):
    parser = argparse.ArgumentParser(prog="east-plot", description=__doc__)
    parser.add_argument("kind", choices=("trajectory", "metrics", "comparison"))
    parser.add_argument("logs", nargs="+", help="run log CSV file(s)")
    parser.add_argument("--world", help="scenario JSON for world geometry and markers")
    parser.add_argument("--path", help="planned path JSON (east plan output)")
    parser.add_argument("--labels", help="comma-separated labels for comparison runs")
    parser.add_argument("-o", "--out", required=True, help="output image path")
    args = parser.parse_args(argv)

    try:
        logs = [logdata.read_log(p) for p in args.logs]
        world = logdata.read_world(args.world) if args.world else None
        planned = logdata.read_path(args.path) if args.path else None
    except (logdata.LogFormatError, OSError, ValueError) as e:
        print(f"ERROR 1: {e}", file=sys.stderr)
        return 1

    if args.kind == "trajectory":
        fig = render.trajectory_figure(logs[0], world=world, planned=planned)
    elif args.kind == "metrics":
        fig = render.metrics_figure(logs[0])
    else:
        if len(logs) < 2:
            print("ERROR 1: comparison needs at least two logs", file=sys.stderr)
            return 1
        labels = (args.labels.split(",") if args.labels
                  else [Path(p).stem for p in args.logs])
        fig = render.comparison_figure(logs, labels, world=world)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    render.save(fig, out)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
