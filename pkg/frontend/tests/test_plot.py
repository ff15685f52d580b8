"""Tests for plot.py: chart rendering and printed series slopes.

The script is exercised through its command-line interface only, the
same way the solver package's CSV output reaches it.
"""

import csv
import re
import subprocess
import sys
from pathlib import Path

import pytest

SCRIPT = Path(__file__).resolve().parents[1] / "plot.py"
HEADER = [
    "regime", "epsilon", "tau", "kappa", "M", "horizon",
    "err_h1_w", "err_l2_z", "err_total", "err_composite", "order",
    "wall_time_s",
]


def write_csv(path, rows, header=None):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(HEADER if header is None else header)
        writer.writerows(rows)
    return path


def long_time_row(epsilon, tau, err):
    return ["long_time", epsilon, tau, epsilon**2 * tau, "32", 1.0 / epsilon**2,
            err / 2, err / 2, err, err, "", 0.1]


def oscillatory_row(epsilon, kappa, err, tau="1.0"):
    return ["oscillatory", epsilon, tau, kappa, "128", 1.0,
            err / 2, err / 2, err, err, "", 0.1]


def run_plot(*args):
    return subprocess.run(
        [sys.executable, str(SCRIPT)] + [str(a) for a in args],
        capture_output=True, text=True,
    )


def printed_slopes(stdout):
    return {
        m.group(1): float(m.group(2))
        for m in re.finditer(r"(\S+): slope ([+-][0-9.]+) over (\d+) points", stdout)
    }


class TestErrVsTau:
    def test_two_point_series_parallel_to_slope_one(self, tmp_path):
        path = write_csv(tmp_path / "sweep.csv", [
            long_time_row(1.0, 0.1, 4e-2),
            long_time_row(1.0, 0.025, 1e-2),
        ])
        out = tmp_path / "chart.png"
        proc = run_plot("--csv", path, "--kind", "err_vs_tau", "--out", out)
        assert proc.returncode == 0, proc.stderr
        assert out.exists() and out.stat().st_size > 0
        slopes = printed_slopes(proc.stdout)
        assert abs(slopes["epsilon=1"] - 1.0) < 1e-6

    def test_oscillatory_rows_plot_against_kappa(self, tmp_path):
        # tau is held constant, so a fit against tau would be degenerate.
        path = write_csv(tmp_path / "osc.csv", [
            oscillatory_row(0.5, 0.1, 4e-2),
            oscillatory_row(0.5, 0.025, 1e-2),
        ])
        out = tmp_path / "osc.png"
        proc = run_plot("--csv", path, "--kind", "err_vs_tau", "--out", out)
        assert proc.returncode == 0, proc.stderr
        assert abs(printed_slopes(proc.stdout)["epsilon=0.5"] - 1.0) < 1e-6

    def test_one_slope_line_per_series(self, tmp_path):
        path = write_csv(tmp_path / "multi.csv", [
            long_time_row(1.0, 0.1, 4e-2),
            long_time_row(1.0, 0.05, 2e-2),
            long_time_row(0.5, 0.1, 1e-2),
            long_time_row(0.5, 0.05, 5e-3),
        ])
        proc = run_plot("--csv", path, "--kind", "err_vs_tau",
                        "--out", tmp_path / "multi.png")
        assert proc.returncode == 0
        slopes = printed_slopes(proc.stdout)
        assert set(slopes) == {"epsilon=1", "epsilon=0.5"}


class TestErrVsEps:
    def test_quadratic_scaling_series(self, tmp_path):
        rows = [long_time_row(eps, 0.05, 1e-2 * eps**2)
                for eps in (0.5, 0.25, 0.125)]
        path = write_csv(tmp_path / "eps.csv", rows)
        proc = run_plot("--csv", path, "--kind", "err_vs_eps",
                        "--out", tmp_path / "eps.png")
        assert proc.returncode == 0, proc.stderr
        assert abs(printed_slopes(proc.stdout)["step=0.05"] - 2.0) < 1e-6


class TestErrVsM:
    def test_mode_series_and_first_axis_labels(self, tmp_path):
        rows = [
            ["long_time", 1.0, 0.0001, 0.0001, "8x8", 1.0, 0, 0, 1e-2, 1e-2, "", 0.1],
            ["long_time", 1.0, 0.0001, 0.0001, "16x16", 1.0, 0, 0, 1e-5, 1e-5, "", 0.1],
            ["long_time", 1.0, 0.0001, 0.0001, "32x32", 1.0, 0, 0, 1e-8, 1e-8, "", 0.1],
        ]
        path = write_csv(tmp_path / "modes.csv", rows)
        out = tmp_path / "modes.png"
        proc = run_plot("--csv", path, "--kind", "err_vs_M", "--out", out)
        assert proc.returncode == 0, proc.stderr
        assert out.exists() and out.stat().st_size > 0
        assert printed_slopes(proc.stdout)["epsilon=1"] < -4.0


class TestFailureModes:
    def test_header_only_csv_is_an_error(self, tmp_path):
        path = write_csv(tmp_path / "empty.csv", [])
        proc = run_plot("--csv", path, "--kind", "err_vs_tau",
                        "--out", tmp_path / "x.png")
        assert proc.returncode == 1
        assert "no data rows" in proc.stderr

    def test_single_point_series_is_an_error(self, tmp_path):
        path = write_csv(tmp_path / "one.csv", [long_time_row(1.0, 0.1, 4e-2)])
        proc = run_plot("--csv", path, "--kind", "err_vs_tau",
                        "--out", tmp_path / "x.png")
        assert proc.returncode == 1
        assert "need at least 2" in proc.stderr

    def test_missing_column_is_named(self, tmp_path):
        header = [c for c in HEADER if c != "err_composite"]
        rows = [["long_time", 1.0, 0.1, 0.1, "32", 1.0, 0, 0, 1e-2, "", 0.1]]
        path = write_csv(tmp_path / "short.csv", rows, header=header)
        proc = run_plot("--csv", path, "--kind", "err_vs_tau",
                        "--out", tmp_path / "x.png")
        assert proc.returncode == 1
        assert "err_composite" in proc.stderr

    def test_unreadable_csv_is_an_error(self, tmp_path):
        proc = run_plot("--csv", tmp_path / "absent.csv", "--kind", "err_vs_tau",
                        "--out", tmp_path / "x.png")
        assert proc.returncode == 1

    def test_unknown_kind_is_a_usage_error(self, tmp_path):
        path = write_csv(tmp_path / "sweep.csv", [long_time_row(1.0, 0.1, 4e-2)])
        proc = run_plot("--csv", path, "--kind", "err_vs_h",
                        "--out", tmp_path / "x.png")
        assert proc.returncode == 2

    def test_non_numeric_cell_is_an_error(self, tmp_path):
        rows = [long_time_row(1.0, 0.1, 4e-2)]
        rows[0][9] = "broken"
        path = write_csv(tmp_path / "bad.csv", rows)
        proc = run_plot("--csv", path, "--kind", "err_vs_tau",
                        "--out", tmp_path / "x.png")
        assert proc.returncode == 1
        assert "err_composite" in proc.stderr


class TestDeterminism:
    def test_repeat_renders_are_byte_identical(self, tmp_path):
        path = write_csv(tmp_path / "sweep.csv", [
            long_time_row(1.0, 0.1, 4e-2),
            long_time_row(1.0, 0.025, 1e-2),
        ])
        first, second = tmp_path / "a.png", tmp_path / "b.png"
        assert run_plot("--csv", path, "--kind", "err_vs_tau", "--out", first).returncode == 0
        assert run_plot("--csv", path, "--kind", "err_vs_tau", "--out", second).returncode == 0
        assert first.read_bytes() == second.read_bytes()
