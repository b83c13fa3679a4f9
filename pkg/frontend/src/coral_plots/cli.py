"""coral-plot: render figures from a directory of metrics CSVs.

Usage: coral-plot --in <runs-dir> --fig {curves,ice,ablation} --out <dir>
"""

from __future__ import annotations

import argparse
import sys

from .data import load_metrics_dir
from .figures import FigureSpec, plot_ablation, plot_ice_panels, plot_learning_curves


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="coral-plot", description=__doc__)
    parser.add_argument("--in", dest="in_dir", required=True, help="directory of run outputs")
    parser.add_argument("--fig", required=True, choices=("curves", "ice", "ablation"))
    parser.add_argument("--out", dest="out_dir", required=True)
    parser.add_argument("--format", dest="fmt", default="png", choices=("png", "svg"))
    parser.add_argument("--window", type=int, default=100, help="smoothing window in episodes")
    args = parser.parse_args(argv)

    spec = FigureSpec(in_dir=args.in_dir, out_dir=args.out_dir, fmt=args.fmt, smoothing_window=args.window)
    try:
        series = load_metrics_dir(args.in_dir)
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    render = {"curves": plot_learning_curves, "ice": plot_ice_panels, "ablation": plot_ablation}[args.fig]
    try:
        paths = render(spec, series)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
