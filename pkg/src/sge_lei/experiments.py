"""Parameter sweeps, error metrics, and convergence-table reports.

A sweep runs the solver over a grid of (epsilon, step) or (epsilon, mesh)
points, compares each run against a fine reference at the same final
time, and assembles the results into a ConvergenceTable with fitted
orders.  Two scalar composites are carried per cell:

* err_total: H1 error of w plus L2 error of z (their sum).
* err_composite: the scalar used for order fitting and rendering.  In
  the long_time regime it is err_total; in the oscillatory regime it is
  the quadrature combination sqrt(err_h1_w^2 + err_l2_z^2), which is the
  H1 error of the complex reformulation variable and is the quantity the
  published oscillatory error tables report.

Sweep cells are independent and may run in parallel processes; results
are keyed and sorted, so the assembled table does not depend on the
execution order.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .integrator import (
    HorizonError,
    NumericalBlowupError,
    StepParams,
    evolve,
)
from .model import (
    FieldPair,
    InitialData,
    ModelParams,
    assemble_psi0,
    recover_wz,
)
from .spectral_core import PeriodicGrid, SpectralField, resample

CSV_COLUMNS = (
    "regime",
    "epsilon",
    "tau",
    "kappa",
    "M",
    "horizon",
    "err_h1_w",
    "err_l2_z",
    "err_total",
    "err_composite",
    "order",
    "wall_time_s",
)

# Reference meshes matching the published experiment setups.
REFERENCE_MODES = {"paper_1d": 128, "paper_osc": 128, "paper_2d": 32}
DEFAULT_TAU_REF = {"long_time": 1e-4, "oscillatory": 1e-6}


class ErrorParts(NamedTuple):
    h1_w: float
    l2_z: float
    total: float
    quadrature: float


def error_norm(coarse: FieldPair, reference: FieldPair) -> ErrorParts:
    """Error components of coarse against reference at equal times.

    The reference is projected onto the coarse grid's modes (spectral
    truncation); the H1 norm of the w-difference and the L2 norm of the
    z-difference are evaluated there, together with their sum and their
    quadrature combination.
    """
    if not coarse.grid.same_domain(reference.grid):
        raise ValueError("field pairs live on different domains")
    ref_w = resample(reference.w, coarse.grid)
    ref_z = resample(reference.z, coarse.grid)
    dw = coarse.w.coefficients - ref_w.coefficients
    dz = coarse.z.coefficients - ref_z.coefficients
    h1 = float(np.sqrt(np.sum((1.0 + coarse.grid.mu_squared) * np.abs(dw) ** 2)))
    l2 = float(np.sqrt(np.sum(np.abs(dz) ** 2)))
    return ErrorParts(h1, l2, h1 + l2, math.hypot(h1, l2))


@dataclass
class ErrorRecord:
    """One sweep cell: parameters, error components, and timing."""

    regime: str
    epsilon: float
    tau: float
    kappa: float
    modes: tuple[int, ...]
    horizon: float
    err_h1_w: float
    err_l2_z: float
    err_total: float
    err_composite: float
    order: Optional[float] = None
    wall_time_s: float = 0.0

    def __post_init__(self):
        for name in ("err_h1_w", "err_l2_z", "err_total", "err_composite"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
        if abs(self.err_total - (self.err_h1_w + self.err_l2_z)) > 1e-14 * max(
            1.0, self.err_total
        ):
            raise ValueError("err_total must equal err_h1_w + err_l2_z")

    @property
    def modes_label(self) -> str:
        return "x".join(str(m) for m in self.modes)


@dataclass
class ConvergenceTable:
    """Errors on a (row label) x (column label) grid with fitted orders.

    Rows are epsilon values; columns are the refined parameter (tau,
    kappa, or M).  Orders sit between adjacent columns and are computed
    from err_composite; a missing neighbor leaves the order undefined.
    """

    regime: str
    mode: str
    col_kind: str
    row_labels: list[float]
    col_labels: list[float]
    records: dict[tuple[int, int], ErrorRecord] = field(default_factory=dict)
    failures: dict[tuple[int, int], str] = field(default_factory=dict)

    def row_errors(self, i: int) -> list[Optional[float]]:
        return [
            self.records[(i, j)].err_composite if (i, j) in self.records else None
            for j in range(len(self.col_labels))
        ]

    def row_orders(self, i: int) -> list[Optional[float]]:
        """Order between columns j-1 and j, at positions j = 1.."""
        errs = self.row_errors(i)
        out: list[Optional[float]] = []
        for j in range(1, len(errs)):
            prev, cur = errs[j - 1], errs[j]
            ratio = self._refinement_ratio(j)
            if prev and cur and prev > 0 and cur > 0 and ratio and ratio > 1:
                out.append(math.log(prev / cur) / math.log(ratio))
            else:
                out.append(None)
        return out

    def _refinement_ratio(self, j: int) -> Optional[float]:
        a, b = self.col_labels[j - 1], self.col_labels[j]
        if self.col_kind == "M":  # refinement means more modes
            return b / a if a else None
        return a / b if b else None

    def row_slope(self, i: int) -> Optional[float]:
        """Least-squares slope of log err against log column value."""
        xs, ys = [], []
        for j, err in enumerate(self.row_errors(i)):
            if err is not None and err > 0:
                xs.append(self.col_labels[j])
                ys.append(err)
        if len(xs) < 2:
            return None
        return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])

    def column_errors(self, j: int) -> list[Optional[float]]:
        return [
            self.records[(i, j)].err_composite if (i, j) in self.records else None
            for i in range(len(self.row_labels))
        ]

    def render(self, marked: Sequence[tuple[int, int]] = ()) -> str:
        """Aligned text table; marked cells get a trailing asterisk."""
        marked = set(marked)
        corner = "eps / " + self.col_kind
        width = 12
        lines = []
        header = f"{corner:>14}" + "".join(
            f"{label:>{width}.4g}" for label in self.col_labels
        )
        lines.append(header)
        for i, eps in enumerate(self.row_labels):
            cells = []
            for j in range(len(self.col_labels)):
                rec = self.records.get((i, j))
                if rec is None:
                    cells.append(f"{'failed':>{width}}")
                else:
                    star = "*" if (i, j) in marked else ""
                    cells.append(f"{rec.err_composite:>{width - len(star)}.3e}{star}")
            lines.append(f"{eps:>14.6g}" + "".join(cells))
            orders = self.row_orders(i)
            order_cells = [f"{'-':>{width}}"]
            for o in orders:
                order_cells.append(
                    f"{'-':>{width}}" if o is None else f"{o:>{width}.2f}"
                )
            lines.append(f"{'order':>14}" + "".join(order_cells))
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as handle:
            handle.write(",".join(CSV_COLUMNS) + "\n")
            for key in sorted(self.records):
                i, j = key
                rec = self.records[key]
                order = self.row_orders(i)[j - 1] if j >= 1 else None
                cells = [
                    rec.regime,
                    f"{rec.epsilon:.12g}",
                    f"{rec.tau:.12g}",
                    f"{rec.kappa:.12g}",
                    rec.modes_label,
                    f"{rec.horizon:.12g}",
                    f"{rec.err_h1_w:.12e}",
                    f"{rec.err_l2_z:.12e}",
                    f"{rec.err_total:.12e}",
                    f"{rec.err_composite:.12e}",
                    "" if order is None else f"{order:.6f}",
                    f"{rec.wall_time_s:.6f}",
                ]
                handle.write(",".join(cells) + "\n")

    def to_json(self, path, config: Optional[dict] = None) -> None:
        cells = []
        for key in sorted(self.records):
            i, j = key
            rec = self.records[key]
            order = self.row_orders(i)[j - 1] if j >= 1 else None
            cells.append(
                {
                    "row": i,
                    "col": j,
                    "regime": rec.regime,
                    "epsilon": rec.epsilon,
                    "tau": rec.tau,
                    "kappa": rec.kappa,
                    "M": rec.modes_label,
                    "horizon": rec.horizon,
                    "err_h1_w": rec.err_h1_w,
                    "err_l2_z": rec.err_l2_z,
                    "err_total": rec.err_total,
                    "err_composite": rec.err_composite,
                    "order": order,
                    "wall_time_s": rec.wall_time_s,
                }
            )
        doc = {
            "schema": "convergence-table/1",
            "regime": self.regime,
            "mode": self.mode,
            "col_kind": self.col_kind,
            "row_labels": self.row_labels,
            "col_labels": self.col_labels,
            "row_slopes": [self.row_slope(i) for i in range(len(self.row_labels))],
            "cells": cells,
            "failures": {f"{i},{j}": msg for (i, j), msg in sorted(self.failures.items())},
            "metadata": {
                "git_hash": _git_hash(),
                "config_digest": None if config is None else config_digest(config),
                "config": config,
                "created_utc": datetime.now(timezone.utc).isoformat(),
            },
        }
        with open(path, "w") as handle:
            json.dump(doc, handle, indent=2, sort_keys=True)
            handle.write("\n")


def fit_order(errors: Sequence[float], ratio: float) -> list[Optional[float]]:
    """Adjacent-pair orders log(e_j / e_{j+1}) / log(ratio).

    Nonpositive or missing errors yield None markers rather than raising.
    """
    if ratio <= 1.0:
        raise ValueError(f"refinement ratio must exceed 1, got {ratio}")
    out: list[Optional[float]] = []
    for prev, cur in zip(errors, errors[1:]):
        ok = (
            prev is not None
            and cur is not None
            and prev > 0
            and cur > 0
            and np.isfinite(prev)
            and np.isfinite(cur)
        )
        out.append(math.log(prev / cur) / math.log(ratio) if ok else None)
    return out


def least_squares_slope(xs: Sequence[float], errors: Sequence[float]) -> float:
    """Slope of log(err) against log(x) over the positive entries."""
    pairs = [(x, e) for x, e in zip(xs, errors) if e is not None and e > 0]
    if len(pairs) < 2:
        raise ValueError("need at least two positive errors to fit a slope")
    lx = np.log([p[0] for p in pairs])
    le = np.log([p[1] for p in pairs])
    return float(np.polyfit(lx, le, 1)[0])


def config_digest(config: dict) -> str:
    """Eight-hex-character digest of a canonically serialized config."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:8]


def _git_hash() -> Optional[str]:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
    except OSError:
        return None
    return out.stdout.strip() if out.returncode == 0 else None


def resolve_jobs(jobs: Optional[int] = None) -> int:
    """Worker count: explicit argument, else SGE_LEI_JOBS, else cpu count."""
    if jobs is None:
        env = os.environ.get("SGE_LEI_JOBS", "").strip()
        jobs = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(jobs))


def _run_single(
    data: InitialData, params: ModelParams, tau_nominal: float
) -> tuple[np.ndarray, float, float]:
    """Evolve to params.horizon_t; return (final coefficients, fitted tau, seconds)."""
    t0 = time.perf_counter()
    step = StepParams.for_horizon(params.grid, params.horizon_t, tau_nominal)
    state0 = assemble_psi0(data, params.grid, params)
    traj = evolve(state0, step)
    return traj.final().psi.coefficients, step.tau, time.perf_counter() - t0


def _run_many(tasks: dict, jobs: int) -> dict:
    """Execute {key: (data, params, tau)} tasks, catching per-task failures."""
    results: dict = {}
    if jobs == 1 or len(tasks) <= 1:
        for key in sorted(tasks):
            try:
                results[key] = _run_single(*tasks[key])
            except (NumericalBlowupError, HorizonError) as exc:
                results[key] = exc
        return results
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        futures = {key: pool.submit(_run_single, *args) for key, args in sorted(tasks.items())}
        for key, fut in futures.items():
            try:
                results[key] = fut.result()
            except (NumericalBlowupError, HorizonError) as exc:
                results[key] = exc
    return results


def _pair_from_coeffs(coeffs: np.ndarray, grid: PeriodicGrid) -> FieldPair:
    return recover_wz(SpectralField.from_coefficients(grid, coeffs))


def temporal_sweep(
    data: InitialData,
    grid: PeriodicGrid,
    epsilons: Sequence[float],
    steps: Sequence[float],
    regime: str = "long_time",
    final_time: float = 1.0,
    ref_step: Optional[float] = None,
    jobs: Optional[int] = None,
    mode: str = "time",
) -> ConvergenceTable:
    """Errors against a shared per-epsilon reference for each step size.

    `steps` are solver time steps in the long_time regime and rescaled
    steps kappa in the oscillatory regime (where tau = kappa / eps^2).
    Every run in a row, including the reference (default step
    1e-4 respectively 1e-6), uses the same grid, so the comparison
    isolates the temporal error.  Errors are evaluated at the horizon
    t = final_time / eps^2.
    """
    if ref_step is None:
        ref_step = DEFAULT_TAU_REF[regime]
    jobs = resolve_jobs(jobs)
    col_kind = "kappa" if regime == "oscillatory" else "tau"

    def to_tau(step_value: float, eps: float) -> float:
        return step_value / eps**2 if regime == "oscillatory" else step_value

    tasks = {}
    for i, eps in enumerate(epsilons):
        params = ModelParams(eps, grid, regime=regime, final_time=final_time)
        tasks[("ref", i, -1)] = (data, params, to_tau(ref_step, eps))
        for j, step_value in enumerate(steps):
            tasks[("cell", i, j)] = (data, params, to_tau(step_value, eps))
    results = _run_many(tasks, jobs)

    table = ConvergenceTable(
        regime=regime,
        mode=mode,
        col_kind=col_kind,
        row_labels=[float(e) for e in epsilons],
        col_labels=[float(s) for s in steps],
    )
    for i, eps in enumerate(epsilons):
        horizon = final_time / eps**2
        ref = results[("ref", i, -1)]
        if isinstance(ref, Exception):
            for j in range(len(steps)):
                table.failures[(i, j)] = f"reference failed: {ref}"
            continue
        ref_pair = _pair_from_coeffs(ref[0], grid)
        for j in range(len(steps)):
            res = results[("cell", i, j)]
            if isinstance(res, Exception):
                table.failures[(i, j)] = str(res)
                continue
            coeffs, tau_fitted, seconds = res
            parts = error_norm(_pair_from_coeffs(coeffs, grid), ref_pair)
            composite = parts.quadrature if regime == "oscillatory" else parts.total
            table.records[(i, j)] = ErrorRecord(
                regime=regime,
                epsilon=float(eps),
                tau=tau_fitted,
                kappa=eps**2 * tau_fitted,
                modes=grid.modes,
                horizon=horizon,
                err_h1_w=parts.h1_w,
                err_l2_z=parts.l2_z,
                err_total=parts.total,
                err_composite=composite,
                wall_time_s=seconds,
            )
    return table


def spatial_sweep(
    data: InitialData,
    endpoints: Sequence[tuple[float, float]],
    epsilons: Sequence[float],
    mode_counts: Sequence[int],
    ref_modes: Optional[int] = None,
    tau_e: float = 1e-4,
    final_time: float = 1.0,
    jobs: Optional[int] = None,
) -> ConvergenceTable:
    """Errors against a fine-mesh reference for each mode count.

    Reference and coarse runs share the step tau_e, so the temporal error
    cancels in the comparison and only the spatial error remains.  The
    reference mesh defaults to twice the finest swept mesh.
    """
    if ref_modes is None:
        ref_modes = 2 * max(mode_counts)
    jobs = resolve_jobs(jobs)
    dim = len(endpoints)
    ref_grid = PeriodicGrid(endpoints, [ref_modes] * dim)

    tasks = {}
    for i, eps in enumerate(epsilons):
        params_ref = ModelParams(eps, ref_grid, final_time=final_time)
        tasks[("ref", i, -1)] = (data, params_ref, tau_e)
        for j, m in enumerate(mode_counts):
            grid = PeriodicGrid(endpoints, [m] * dim)
            params = ModelParams(eps, grid, final_time=final_time)
            tasks[("cell", i, j)] = (data, params, tau_e)
    results = _run_many(tasks, jobs)

    table = ConvergenceTable(
        regime="long_time",
        mode="space",
        col_kind="M",
        row_labels=[float(e) for e in epsilons],
        col_labels=[float(m) for m in mode_counts],
    )
    for i, eps in enumerate(epsilons):
        ref = results[("ref", i, -1)]
        if isinstance(ref, Exception):
            for j in range(len(mode_counts)):
                table.failures[(i, j)] = f"reference failed: {ref}"
            continue
        ref_pair = _pair_from_coeffs(ref[0], ref_grid)
        for j, m in enumerate(mode_counts):
            res = results[("cell", i, j)]
            if isinstance(res, Exception):
                table.failures[(i, j)] = str(res)
                continue
            coeffs, tau_fitted, seconds = res
            grid = PeriodicGrid(endpoints, [m] * dim)
            parts = error_norm(_pair_from_coeffs(coeffs, grid), ref_pair)
            table.records[(i, j)] = ErrorRecord(
                regime="long_time",
                epsilon=float(eps),
                tau=tau_fitted,
                kappa=eps**2 * tau_fitted,
                modes=grid.modes,
                horizon=final_time / eps**2,
                err_h1_w=parts.h1_w,
                err_l2_z=parts.l2_z,
                err_total=parts.total,
                err_composite=parts.total,
                wall_time_s=seconds,
            )
    return table


TABLE1_EPSILONS = tuple(1.0 / 2**i for i in range(6))
TABLE1_KAPPAS = tuple(0.1 / 4**j for j in range(6))


def table1_sweep(
    jobs: Optional[int] = None,
    kappa_e: float = 1e-6,
    modes: int = 128,
) -> ConvergenceTable:
    """The full oscillatory-regime error grid at s = 1.

    Rows eps = 1, 1/2, ..., 1/32; columns kappa = 0.1, 0.1/4, ...,
    0.1/4^5; reference step kappa_e on the same mesh.  First-order
    convergence appears on and below the diagonal kappa ~ eps^2.
    """
    data = InitialData(preset="paper_osc")
    grid = PeriodicGrid(data.domain(), [modes])
    return temporal_sweep(
        data,
        grid,
        TABLE1_EPSILONS,
        TABLE1_KAPPAS,
        regime="oscillatory",
        final_time=1.0,
        ref_step=kappa_e,
        jobs=jobs,
        mode="table1",
    )
