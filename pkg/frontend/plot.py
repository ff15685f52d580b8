#!/usr/bin/env python3
"""Render log-log convergence charts from sweep CSV files.

Reads the solver's sweep CSV schema (regime, epsilon, tau, kappa, M,
horizon, err_h1_w, err_l2_z, err_total, err_composite, order,
wall_time_s) and draws one chart per invocation:

  err_vs_tau   error against the time step, one series per epsilon;
               oscillatory rows plot against kappa instead of tau
  err_vs_eps   error against epsilon, one series per step size
  err_vs_M     error against the mode count (first axis), one series
               per epsilon

A dashed guide line with the expected slope is anchored at the coarsest
point of the first series.  The least-squares slope of every series is
printed to stdout, one line each, so convergence can be checked without
opening the image.

Usage: plot.py --csv PATH --kind KIND --out PATH.png [--guide SLOPE]
"""

import argparse
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("err_vs_tau", "err_vs_eps", "err_vs_M")
REQUIRED = {
    "err_vs_tau": ("regime", "epsilon", "tau", "err_composite"),
    "err_vs_eps": ("regime", "epsilon", "tau", "err_composite"),
    "err_vs_M": ("epsilon", "M", "err_composite"),
}
DEFAULT_GUIDE = {"err_vs_tau": 1.0, "err_vs_eps": 2.0, "err_vs_M": None}
X_LABEL = {"err_vs_tau": "time step", "err_vs_eps": "epsilon", "err_vs_M": "modes per axis"}


class DataError(Exception):
    pass


def _number(row, column):
    try:
        return float(row[column])
    except ValueError:
        raise DataError(f"bad number in column {column!r}: {row[column]!r}") from None


def _step_value(row, fields):
    """Refined step of one row: kappa for oscillatory rows, else tau."""
    if row.get("regime") == "oscillatory":
        if "kappa" not in fields:
            raise DataError("missing column: kappa")
        return _number(row, "kappa")
    return _number(row, "tau")


def load_series(path, kind):
    """Map series label -> [(x, error)] in CSV row order."""
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise DataError(str(exc)) from None
    with handle:
        reader = csv.DictReader(handle)
        fields = set(reader.fieldnames or ())
        for column in REQUIRED[kind]:
            if column not in fields:
                raise DataError(f"missing column: {column}")
        series = {}
        for row in reader:
            err = _number(row, "err_composite")
            if kind == "err_vs_tau":
                label = f"epsilon={_number(row, 'epsilon'):g}"
                x = _step_value(row, fields)
            elif kind == "err_vs_eps":
                label = f"step={_step_value(row, fields):g}"
                x = _number(row, "epsilon")
            else:
                label = f"epsilon={_number(row, 'epsilon'):g}"
                x = float(row["M"].split("x")[0])
            series.setdefault(label, []).append((x, err))
    if not series:
        raise DataError(f"no data rows in {path}")
    for label, points in series.items():
        points[:] = sorted((x, y) for x, y in points if y > 0.0)
        if len(points) < 2:
            raise DataError(
                f"series {label} has {len(points)} usable point(s); need at least 2"
            )
    return series


def render(series, kind, out, guide):
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for label, points in series.items():
        xs = [x for x, _ in points]
        ys = [y for _, y in points]
        ax.loglog(xs, ys, marker="o", label=label)
        slope = np.polyfit(np.log10(xs), np.log10(ys), 1)[0]
        print(f"{label}: slope {slope:+.3f} over {len(points)} points")

    if guide is not None:
        anchor_x, anchor_y = max(next(iter(series.values())))
        lo = min(x for pts in series.values() for x, _ in pts)
        xs = np.array([lo, anchor_x])
        ax.loglog(xs, anchor_y * (xs / anchor_x) ** guide, "k--", linewidth=1.0,
                  label=f"slope {guide:g}")

    ax.set_xlabel(X_LABEL[kind])
    ax.set_ylabel("error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    # Pinned metadata keeps repeated renders byte-identical.
    fig.savefig(out, dpi=150, metadata={"Software": "plot.py"})
    plt.close(fig)


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Render log-log convergence charts from sweep CSV files."
    )
    parser.add_argument("--csv", required=True, metavar="PATH", help="sweep CSV file")
    parser.add_argument("--kind", required=True, choices=KINDS, help="chart type")
    parser.add_argument("--out", required=True, metavar="PATH.png", help="output image")
    parser.add_argument(
        "--guide", type=float, default=None, metavar="SLOPE",
        help="guide-line slope (default: 1 for err_vs_tau, 2 for err_vs_eps)",
    )
    args = parser.parse_args(argv)

    guide = args.guide if args.guide is not None else DEFAULT_GUIDE[args.kind]
    try:
        series = load_series(Path(args.csv), args.kind)
        render(series, args.kind, args.out, guide)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
