"""Problem definition for the weakly nonlinear sine-Gordon equation.

The second-order equation d_tt w - Laplace w + (1/eps) sin(eps w) = 0 with
data w(0) = phi, d_t w(0) = gamma is reformulated as a first-order complex
equation for psi = w - i <nabla>^{-1} z, where z = d_t w and <nabla> is the
operator sqrt(1 - Laplace):

    i d_t psi = -<nabla> psi - <nabla>^{-1} g(psi),
    g(psi) = f((psi + conj(psi)) / 2),
    f(w) = (1/eps) sin(eps w) - w.

This module owns the parameter and initial-data types, the nonlinearities,
the psi assembly and (w, z) recovery maps, and the conserved energy of the
original equation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .spectral_core import (
    PeriodicGrid,
    SpectralField,
    fft_coefficients,
    ifft_values,
    reflected_conjugate,
)

REGIMES = ("long_time", "oscillatory")

# Below this value of eps * max|w| the direct formula for f has lost about
# half its significant digits; the odd series is accurate to ~1e-12 relative
# there, so the two branches hand over smoothly.
SERIES_THRESHOLD = 0.05

REALNESS_TOL = 1e-10


class RealnessError(ValueError):
    """Recovered field has an imaginary residue above tolerance."""


@dataclass(frozen=True)
class ModelParams:
    """Equation parameters and the time horizon.

    final_time is the horizon in the regime's own clock: the long_time
    regime runs to t = final_time / eps^2, the oscillatory regime runs to
    rescaled time s = final_time (the same physical time, since s = eps^2 t).
    """

    epsilon: float
    grid: PeriodicGrid
    regime: str = "long_time"
    final_time: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.final_time <= 0.0:
            raise ValueError(f"final_time must be positive, got {self.final_time}")
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")

    @property
    def horizon_t(self) -> float:
        """Final physical time of the run."""
        return self.final_time / self.epsilon**2


PRESET_DOMAINS = {
    "paper_1d": ((0.0, 2.0 * np.pi),),
    "paper_2d": ((0.0, 1.0), (0.0, 2.0 * np.pi)),
    "paper_osc": ((0.0, 1.0),),
}


def _phi_paper_1d(x):
    return 2.0 / (1.0 + np.cos(x) ** 2)


def _gamma_paper_1d(x):
    return 1.0 / (2.0 + np.sin(x))


def _phi_paper_2d(x, y):
    return 2.0 / (2.0 + np.cos(2.0 * np.pi * x + y) ** 2)


def _gamma_paper_2d(x, y):
    return 2.0 / (2.0 + 2.0 * np.cos(2.0 * np.pi * x + y) ** 2)


def _phi_paper_osc(x):
    return x**2 * (x - 1.0) ** 2 + 3.0


def _gamma_paper_osc(x):
    return x * (x - 1.0) * (2.0 * x - 1.0)


_PRESET_FUNCS = {
    "paper_1d": (_phi_paper_1d, _gamma_paper_1d),
    "paper_2d": (_phi_paper_2d, _gamma_paper_2d),
    "paper_osc": (_phi_paper_osc, _gamma_paper_osc),
}


@dataclass(frozen=True)
class InitialData:
    """Initial displacement phi and velocity gamma, by preset or table.

    Presets: the named analytic data sets, "zero", and
    "single_mode" (phi = amplitude * cos(mu_l . (x - a)), gamma = 0).
    Tabulated data holds flat row-major node values and must match the
    grid it is evaluated on.
    """

    preset: str
    mode: tuple[int, ...] = (1,)
    amplitude: float = 1.0
    phi_table: Optional[np.ndarray] = field(default=None, repr=False)
    gamma_table: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        known = set(_PRESET_FUNCS) | {"zero", "single_mode", "tabulated"}
        if self.preset not in known:
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.preset == "tabulated" and (
            self.phi_table is None or self.gamma_table is None
        ):
            raise ValueError("tabulated data requires phi_table and gamma_table")

    def _evaluate(self, grid: PeriodicGrid, which: int) -> np.ndarray:
        if self.preset == "zero":
            return np.zeros(grid.shape)
        if self.preset == "single_mode":
            if which == 1:
                return np.zeros(grid.shape)
            if len(self.mode) != grid.dim:
                raise ValueError("mode index dimension does not match grid")
            phase = np.zeros(grid.shape)
            for l, (a, b), coord in zip(self.mode, grid.endpoints, grid.nodes()):
                phase = phase + (2.0 * np.pi * l / (b - a)) * (coord - a)
            return self.amplitude * np.cos(phase)
        if self.preset == "tabulated":
            table = self.phi_table if which == 0 else self.gamma_table
            if table.size != grid.size:
                raise ValueError(
                    f"tabulated data has {table.size} nodes, grid needs {grid.size}"
                )
            return np.asarray(table, dtype=float).reshape(grid.shape)
        funcs = _PRESET_FUNCS[self.preset]
        return np.asarray(funcs[which](*grid.nodes()), dtype=float)

    def phi_values(self, grid: PeriodicGrid) -> np.ndarray:
        return self._evaluate(grid, 0)

    def gamma_values(self, grid: PeriodicGrid) -> np.ndarray:
        return self._evaluate(grid, 1)

    def domain(self):
        """Default domain endpoints for the named presets, else None."""
        return PRESET_DOMAINS.get(self.preset)


def load_tabulated(path) -> InitialData:
    """Read node data from CSV with columns x[,y],phi,gamma.

    Rows are in row-major node order, matching the grid layout.  A header
    row is permitted and detected by non-numeric content.
    """
    phi_rows = []
    gamma_rows = []
    with open(path, newline="") as handle:
        for index, row in enumerate(csv.reader(handle)):
            if not row:
                continue
            try:
                numbers = [float(cell) for cell in row]
            except ValueError:
                if index == 0:
                    continue  # header
                raise ValueError(f"non-numeric row {index} in {path}") from None
            if len(numbers) < 3:
                raise ValueError("tabulated CSV needs columns x[,y],phi,gamma")
            phi_rows.append(numbers[-2])
            gamma_rows.append(numbers[-1])
    return InitialData(
        preset="tabulated",
        phi_table=np.asarray(phi_rows),
        gamma_table=np.asarray(gamma_rows),
    )


@dataclass
class PsiState:
    """The complex unknown at one time level."""

    psi: SpectralField
    t: float = 0.0
    step_index: int = 0
    params: Optional[ModelParams] = None

    @property
    def grid(self) -> PeriodicGrid:
        return self.psi.grid


@dataclass
class FieldPair:
    """Real solution fields (w, z) with z approximating d_t w."""

    w: SpectralField
    z: SpectralField

    @property
    def grid(self) -> PeriodicGrid:
        return self.w.grid


def nonlinearity_f(w_values: np.ndarray, epsilon: float) -> np.ndarray:
    """Pointwise f(w) = sin(eps w)/eps - w, cancellation-guarded.

    The direct formula subtracts two O(|w|) quantities to produce an
    O((eps w)^2 |w|) result, so for eps * max|w| below SERIES_THRESHOLD
    it is replaced by the odd series
        -(eps^2 w^3 / 6) (1 - (eps w)^2/20 (1 - (eps w)^2/42)),
    whose truncation error at the threshold is ~1e-12 relative.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    w = np.asarray(w_values, dtype=float)
    peak = epsilon * float(np.max(np.abs(w))) if w.size else 0.0
    if peak < SERIES_THRESHOLD:
        t = (epsilon * w) ** 2
        return -(w * t / 6.0) * (1.0 - t / 20.0 * (1.0 - t / 42.0))
    return np.sin(epsilon * w) / epsilon - w


def nonlinearity_g(psi: SpectralField, epsilon: float) -> SpectralField:
    """g(psi) = f(Re psi), real-valued but stored complex."""
    g = nonlinearity_f(psi.values.real, epsilon)
    return SpectralField.from_values(psi.grid, g.astype(np.complex128))


def big_F(psi: SpectralField, epsilon: float) -> SpectralField:
    """F(psi) = i <nabla>^{-1} g(psi); per mode (i / delta_l) g_tilde_l."""
    g = nonlinearity_g(psi, epsilon)
    return SpectralField.from_coefficients(
        psi.grid, (1j / psi.grid.delta) * g.coefficients
    )


def assemble_psi0(
    data: InitialData, grid: PeriodicGrid, params: Optional[ModelParams] = None
) -> PsiState:
    """Build the initial state: psi0_tilde_l = phi_tilde_l - i gamma_tilde_l / delta_l."""
    if params is not None and params.grid != grid:
        raise ValueError("params.grid does not match the assembly grid")
    phi_t = fft_coefficients(data.phi_values(grid).astype(np.complex128), grid)
    gamma_t = fft_coefficients(data.gamma_values(grid).astype(np.complex128), grid)
    coeffs = phi_t - 1j * gamma_t / grid.delta
    psi = SpectralField.from_coefficients(grid, coeffs)
    return PsiState(psi=psi, t=0.0, step_index=0, params=params)


def recover_wz(state) -> FieldPair:
    """Invert the complex reformulation: w = Re psi, z from coefficients.

    Accepts a PsiState or a bare SpectralField.  Coefficient algebra:
    w_tilde_l = (psi_tilde_l + conj(psi)_tilde_l) / 2 and
    z_tilde_l = (i/2) delta_l (psi_tilde_l - conj(psi)_tilde_l), where
    conj(psi)_tilde_l = conj(psi_tilde_{-l}).  Both spectra are conjugate
    symmetric by construction; the imaginary residue of the node values
    is measured and must stay below REALNESS_TOL before it is dropped.
    """
    psi = state.psi if isinstance(state, PsiState) else state
    grid = psi.grid
    c = psi.coefficients
    rc = reflected_conjugate(c)
    w_t = 0.5 * (c + rc)
    z_t = 0.5j * grid.delta * (c - rc)
    w_vals = ifft_values(w_t, grid)
    z_vals = ifft_values(z_t, grid)
    residue = max(
        float(np.max(np.abs(w_vals.imag))), float(np.max(np.abs(z_vals.imag)))
    )
    if residue > REALNESS_TOL:
        raise RealnessError(
            f"imaginary residue {residue:.3e} exceeds {REALNESS_TOL:.0e}; "
            "the state has lost conjugate symmetry"
        )
    w = SpectralField(grid, values=w_vals.real, coefficients=w_t)
    z = SpectralField(grid, values=z_vals.real, coefficients=z_t)
    return FieldPair(w=w, z=z)


def energy(pair: FieldPair, epsilon: float) -> float:
    """Conserved energy of the original-variable equation (u = eps w).

    E = integral of |eps z|^2 + |grad(eps w)|^2 + 2 (1 - cos(eps w)).
    Node-sum quadrature for the pointwise terms, with 2(1 - cos y)
    evaluated as 4 sin^2(y/2) to avoid cancellation; the gradient term is
    summed in coefficient space, where it is diagonal.
    """
    grid = pair.grid
    wv = pair.w.values.real
    zv = pair.z.values.real
    pointwise = grid.cell_volume() * float(
        np.sum((epsilon * zv) ** 2 + 4.0 * np.sin(0.5 * epsilon * wv) ** 2)
    )
    gradient = (
        grid.volume()
        * epsilon**2
        * float(np.sum(grid.mu_squared * np.abs(pair.w.coefficients) ** 2))
    )
    return pointwise + gradient
