"""Command-line entry point: solve, converge, table1.

Configuration comes from a JSON document (--config); the --out and
--jobs flags override the corresponding fields.  --print-config emits
the fully resolved configuration and exits, so any run can be reproduced
from its printed config alone.  Runs are seedless and deterministic.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .experiments import (
    DEFAULT_TAU_REF,
    REFERENCE_MODES,
    config_digest,
    least_squares_slope,
    spatial_sweep,
    table1_sweep,
    temporal_sweep,
)
from .integrator import (
    HorizonError,
    NumericalBlowupError,
    Observer,
    StepParams,
    evolve,
    trajectory_to_binary,
    trajectory_to_csv,
)
from .model import (
    InitialData,
    ModelParams,
    assemble_psi0,
    energy,
    load_tabulated,
    recover_wz,
)
from .spectral_core import PeriodicGrid, sobolev_norm


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    """Resolved run configuration; serializes to/from a flat JSON object."""

    regime: str = "long_time"
    preset: str = "paper_1d"
    data: Optional[str] = None  # tabulated initial-data CSV path
    domain: Optional[list] = None  # [[a, b], ...]; default from preset
    epsilon: list = field(default_factory=lambda: [1.0])
    tau: list = field(default_factory=lambda: [0.1])
    kappa: Optional[list] = None  # oscillatory step list
    M: list = field(default_factory=lambda: [128])
    final_time: float = 1.0
    tau_e: Optional[float] = None  # reference step override
    M_e: Optional[int] = None  # reference mesh override
    out: str = "runs"
    jobs: Optional[int] = None
    seedless: bool = True

    KEYS = (
        "regime",
        "preset",
        "data",
        "domain",
        "epsilon",
        "tau",
        "kappa",
        "M",
        "final_time",
        "tau_e",
        "M_e",
        "out",
        "jobs",
        "seedless",
    )

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        # "mode" appears in --print-config output (it names the subcommand
        # that produced the config) and is accepted back silently.
        unknown = set(raw) - set(cls.KEYS) - {"mode"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**{k: raw[k] for k in cls.KEYS if k in raw})
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.KEYS}

    def validate(self) -> None:
        if self.regime not in ("long_time", "oscillatory"):
            raise ConfigError(f"regime: must be long_time or oscillatory, got {self.regime!r}")
        for name in ("epsilon", "tau", "M"):
            values = getattr(self, name)
            if not isinstance(values, list) or not values:
                raise ConfigError(f"{name}: must be a nonempty list")
        if self.kappa is not None and (not isinstance(self.kappa, list) or not self.kappa):
            raise ConfigError("kappa: must be a nonempty list when present")
        for e in self.epsilon:
            if not 0.0 < e <= 1.0:
                raise ConfigError(f"epsilon: values must lie in (0, 1], got {e}")
        for name in ("tau", "kappa"):
            for v in getattr(self, name) or []:
                if v <= 0.0:
                    raise ConfigError(f"{name}: values must be positive, got {v}")
        for m in self.M:
            for axis_m in m if isinstance(m, list) else [m]:
                if not isinstance(axis_m, int) or axis_m < 4 or axis_m % 2:
                    raise ConfigError(f"M: mode counts must be even integers >= 4, got {axis_m}")
        if self.final_time <= 0.0:
            raise ConfigError(f"final_time: must be positive, got {self.final_time}")
        if self.tau_e is not None and self.tau_e <= 0.0:
            raise ConfigError(f"tau_e: must be positive, got {self.tau_e}")
        if self.jobs is not None and (not isinstance(self.jobs, int) or self.jobs < 1):
            raise ConfigError(f"jobs: must be a positive integer, got {self.jobs}")
        if self.seedless is not True:
            raise ConfigError("seedless: runs are deterministic; only true is supported")
        if self.data is None:
            try:
                InitialData(preset=self.preset)
            except ValueError as exc:
                raise ConfigError(f"preset: {exc}") from exc

    # Derived pieces -------------------------------------------------

    def initial_data(self) -> InitialData:
        if self.data is not None:
            if not os.path.exists(self.data):
                raise ConfigError(f"data: file not found: {self.data}")
            return load_tabulated(self.data)
        return InitialData(preset=self.preset)

    def endpoints(self) -> tuple:
        if self.domain is not None:
            try:
                return tuple((float(a), float(b)) for a, b in self.domain)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"domain: expected [[a, b], ...], got {self.domain}") from exc
        default = InitialData(preset=self.preset).domain() if self.data is None else None
        if default is None:
            raise ConfigError("domain: required when no preset default exists")
        return default

    def grid(self, m=None) -> PeriodicGrid:
        endpoints = self.endpoints()
        m = self.M[0] if m is None else m
        per_axis = m if isinstance(m, list) else [m] * len(endpoints)
        try:
            return PeriodicGrid(endpoints, per_axis)
        except ValueError as exc:
            raise ConfigError(f"M/domain: {exc}") from exc

    def steps(self) -> list:
        if self.regime == "oscillatory" and self.kappa is not None:
            return self.kappa
        return self.tau

    def ref_step(self) -> float:
        return self.tau_e if self.tau_e is not None else DEFAULT_TAU_REF[self.regime]


def load_config(args) -> RunConfig:
    raw = {}
    if args.config:
        try:
            with open(args.config) as handle:
                raw = json.load(handle)
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON in {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config: top-level JSON value must be an object")
    cfg = RunConfig.from_dict(raw)
    if args.out is not None:
        cfg.out = args.out
    if args.jobs is not None:
        cfg.jobs = args.jobs
    cfg.validate()
    return cfg


def _resolved(cfg: RunConfig, mode: str) -> dict:
    doc = cfg.to_dict()
    doc["mode"] = mode
    return doc


def _output_base(cfg: RunConfig, mode: str) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, f"{cfg.regime}_{mode}_{config_digest(_resolved(cfg, mode))}")


def _require_single_point(cfg: RunConfig) -> None:
    for name in ("epsilon", "M"):
        if len(getattr(cfg, name)) != 1:
            raise ConfigError(f"{name}: solve takes a single value, got {getattr(cfg, name)}")
    if len(cfg.steps()) != 1:
        raise ConfigError("tau/kappa: solve takes a single step value")


def cmd_solve(cfg: RunConfig) -> int:
    _require_single_point(cfg)
    eps = cfg.epsilon[0]
    grid = cfg.grid()
    data = cfg.initial_data()
    params = ModelParams(eps, grid, regime=cfg.regime, final_time=cfg.final_time)
    step_value = cfg.steps()[0]
    tau = step_value / eps**2 if cfg.regime == "oscillatory" else step_value
    step = StepParams.for_horizon(grid, params.horizon_t, tau)

    def sample_energy(state):
        return energy(recover_wz(state), eps)

    stride = max(1, step.n_steps // 100)
    observers = [Observer(sample_energy, every=stride, name="energy")]
    snaps = list(range(0, step.n_steps, max(1, step.n_steps // 8)))
    state0 = assemble_psi0(data, grid, params)
    traj = evolve(state0, step, observers=observers, snapshot_indices=snaps)

    pair = recover_wz(traj.final())
    e_samples = traj.diagnostics["energy"]
    e0, e_final = e_samples[0][1], e_samples[-1][1]
    drift = abs(e_final - e0) / max(abs(e0), 1e-300)
    base = _output_base(cfg, "solve")
    trajectory_to_csv(traj, base + ".traj.csv")
    trajectory_to_binary(traj, base + ".traj.bin", epsilon=eps, tau=step.tau)
    summary = {
        "epsilon": eps,
        "tau": step.tau,
        "n_steps": step.n_steps,
        "M": list(grid.modes),
        "t_final": traj.times[-1],
        "norm_h1_w": sobolev_norm(pair.w, 1.0),
        "norm_l2_z": sobolev_norm(pair.z, 0.0),
        "energy_initial": e0,
        "energy_final": e_final,
        "energy_drift_rel": drift,
        "config": _resolved(cfg, "solve"),
    }
    with open(base + ".summary.json", "w") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
    print(
        f"solve: t={traj.times[-1]:g} steps={step.n_steps} "
        f"|w|_H1={summary['norm_h1_w']:.6e} energy drift={drift:.3e}"
    )
    print(f"wrote {base}.traj.csv, {base}.traj.bin, {base}.summary.json")
    return 0


def _emit_table(table, cfg: RunConfig, mode: str, marked=()) -> int:
    base = _output_base(cfg, mode)
    table.to_csv(base + ".csv")
    table.to_json(base + ".json", config=_resolved(cfg, mode))
    print(table.render(marked=marked))
    for i in range(len(table.row_labels)):
        slope = table.row_slope(i)
        if slope is not None:
            print(f"row eps={table.row_labels[i]:g}: least-squares slope {slope:+.3f}")
    if table.failures:
        for key, msg in sorted(table.failures.items()):
            print(f"warning: cell {key} failed: {msg}", file=sys.stderr)
    print(f"wrote {base}.csv, {base}.json")
    if table.records:
        return 0
    print("error: all cells failed", file=sys.stderr)
    return 1


def cmd_converge(cfg: RunConfig, mode: str) -> int:
    data = cfg.initial_data()
    if mode == "space":
        if any(isinstance(m, list) for m in cfg.M):
            raise ConfigError("M: space mode sweeps per-axis-equal meshes; use integers")
        ref_modes = cfg.M_e or REFERENCE_MODES.get(cfg.preset)
        table = spatial_sweep(
            data,
            cfg.endpoints(),
            cfg.epsilon,
            cfg.M,
            ref_modes=ref_modes,
            tau_e=cfg.tau_e if cfg.tau_e is not None else 1e-4,
            final_time=cfg.final_time,
            jobs=cfg.jobs,
        )
        return _emit_table(table, cfg, mode)

    grid = cfg.grid()
    if mode == "time":
        table = temporal_sweep(
            data,
            grid,
            cfg.epsilon,
            cfg.steps(),
            regime=cfg.regime,
            final_time=cfg.final_time,
            ref_step=cfg.ref_step(),
            jobs=cfg.jobs,
            mode=mode,
        )
        return _emit_table(table, cfg, mode)

    if mode == "epsilon":
        steps = cfg.steps()
        if len(steps) != 1:
            raise ConfigError("tau/kappa: epsilon mode uses a single fixed step")
        table = temporal_sweep(
            data,
            grid,
            cfg.epsilon,
            steps,
            regime=cfg.regime,
            final_time=cfg.final_time,
            ref_step=cfg.ref_step(),
            jobs=cfg.jobs,
            mode=mode,
        )
        status = _emit_table(table, cfg, mode)
        errs = table.column_errors(0)
        try:
            slope = least_squares_slope(table.row_labels, errs)
            print(f"epsilon scaling: least-squares slope {slope:+.3f} at fixed step {steps[0]:g}")
        except ValueError:
            pass
        return status

    raise ConfigError(f"mode: unknown converge mode {mode!r}")


def cmd_table1(cfg: RunConfig) -> int:
    if cfg.regime != "oscillatory":
        cfg.regime = "oscillatory"
    kappa_e = cfg.tau_e if cfg.tau_e is not None else 1e-6
    modes = cfg.M[0] if cfg.M else 128
    if isinstance(modes, list):
        raise ConfigError("M: table1 runs in 1D; use an integer mode count")
    table = table1_sweep(jobs=cfg.jobs, kappa_e=kappa_e, modes=modes)
    diagonal = [(i, i) for i in range(len(table.row_labels))]
    return _emit_table(table, cfg, "table1", marked=diagonal)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sge-lei",
        description="Exponential-integrator pseudospectral solver for the "
        "weakly nonlinear sine-Gordon equation, with convergence studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = dict(
        config=("--config", dict(metavar="PATH", help="JSON run configuration")),
        out=("--out", dict(metavar="DIR", help="output directory (default: runs)")),
        jobs=("--jobs", dict(type=int, metavar="N", help="parallel sweep workers")),
        print_config=(
            "--print-config",
            dict(action="store_true", help="print resolved config and exit"),
        ),
    )
    for name, help_text in (
        ("solve", "single run; writes trajectory and summary"),
        ("converge", "refinement sweep; writes convergence table"),
        ("table1", "full oscillatory-regime error grid"),
    ):
        p = sub.add_parser(name, help=help_text)
        for flag, kwargs in common.values():
            p.add_argument(flag, **kwargs)
        if name == "converge":
            p.add_argument(
                "--mode",
                choices=("time", "space", "epsilon"),
                required=True,
                help="which parameter to refine",
            )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args)
        mode = getattr(args, "mode", None) or (
            "table1" if args.command == "table1" else "solve"
        )
        if args.print_config:
            print(json.dumps(_resolved(cfg, mode), indent=2, sort_keys=True))
            return 0
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "converge":
            return cmd_converge(cfg, args.mode)
        return cmd_table1(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalBlowupError, HorizonError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
