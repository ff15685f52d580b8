"""Time-rescaled oscillatory regime.

With s = eps^2 t the long-time problem becomes, in the rescaled clock,
an equation whose solution oscillates with period O(eps^2) in s:

    eps^4 d_ss v - Laplace v + (1/eps) sin(eps v) = 0,
    v(x, 0) = phi(x),  d_s v(x, 0) = gamma(x) / eps^2.

Rather than discretizing in s (a stiff formulation), runs are delegated
to the standard solver with tau = kappa / eps^2 up to t = S / eps^2; the
wrapper only relabels times and scales the velocity, so the w-trajectory
is bit-identical to the long-time solver's.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .integrator import StepParams, evolve
from .model import FieldPair, InitialData, ModelParams, assemble_psi0, recover_wz
from .spectral_core import PeriodicGrid, SpectralField, resample, sobolev_norm

MAX_STEPS = 10**8


@dataclass
class OscState:
    """Rescaled solution sample: v(s) = w(s/eps^2) and q = d_s v = z/eps^2."""

    v: SpectralField
    q: SpectralField
    s: float
    kappa: float
    epsilon: float

    @property
    def grid(self) -> PeriodicGrid:
        return self.v.grid


def _to_osc(pair: FieldPair, s: float, kappa: float, epsilon: float) -> OscState:
    scale = 1.0 / epsilon**2
    q = SpectralField(
        pair.z.grid,
        values=pair.z.values * scale,
        coefficients=pair.z.coefficients * scale,
    )
    return OscState(v=pair.w, q=q, s=s, kappa=kappa, epsilon=epsilon)


def solve_oscillatory(
    data: InitialData,
    epsilon: float,
    kappa: float,
    S: float,
    grid: PeriodicGrid,
    s_samples: Optional[Sequence[float]] = None,
) -> list[OscState]:
    """Run to rescaled time S with rescaled step kappa; sample at s values.

    Samples must be multiples of kappa (the final time S is always
    included).  Runs needing more than MAX_STEPS steps are rejected;
    shrink S or grow kappa.
    """
    if kappa <= 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    params = ModelParams(epsilon, grid, regime="oscillatory", final_time=S)
    n_nominal = S / kappa
    if n_nominal > MAX_STEPS:
        raise ValueError(
            f"S/kappa = {n_nominal:.3g} exceeds the {MAX_STEPS:.0e} step budget; "
            "increase kappa or reduce S"
        )
    tau = kappa / epsilon**2
    step = StepParams.for_horizon(grid, params.horizon_t, tau)
    kappa_fitted = epsilon**2 * step.tau

    if s_samples is None:
        s_samples = [S]
    indices = {}
    for s in s_samples:
        k = round(s / kappa_fitted)
        if not 0 <= k <= step.n_steps or abs(k * kappa_fitted - s) > 1e-9 * max(1.0, s):
            raise ValueError(f"sample s={s} is not a step multiple within the run")
        indices[k] = float(s)
    indices.setdefault(step.n_steps, float(S))

    state0 = assemble_psi0(data, grid, params)
    traj = evolve(state0, step, snapshot_indices=sorted(indices))
    out = []
    for t, st in zip(traj.times, traj.states):
        if st.step_index in indices:
            pair = recover_wz(st)
            out.append(_to_osc(pair, indices[st.step_index], kappa_fitted, epsilon))
    return out


def osc_error_parts(
    coarse: OscState, reference: OscState, epsilon: float
) -> tuple[float, float]:
    """Component norms of the difference: (H1 of dv, L2 of eps^2 dq).

    The reference is projected onto the coarse grid's modes first.
    """
    if abs(coarse.s - reference.s) > 1e-9 * max(1.0, abs(coarse.s)):
        raise ValueError(
            f"states are at different times: s={coarse.s} vs {reference.s}"
        )
    ref_v = resample(reference.v, coarse.grid)
    ref_q = resample(reference.q, coarse.grid)
    dv = SpectralField.from_coefficients(
        coarse.grid, coarse.v.coefficients - ref_v.coefficients
    )
    dq = SpectralField.from_coefficients(
        coarse.grid, epsilon**2 * (coarse.q.coefficients - ref_q.coefficients)
    )
    return sobolev_norm(dv, 1.0), sobolev_norm(dq, 0.0)


def osc_error(coarse: OscState, reference: OscState, epsilon: float) -> float:
    """Composite error combining the H1 v-difference with eps^2 times the
    L2 q-difference.

    The two parts are combined in quadrature: this equals the H1 norm of
    the complex-variable difference dv - i <nabla>^{-1} (eps^2 dq), the
    quantity whose convergence the scheme's error bound controls.
    """
    h1_v, l2_q = osc_error_parts(coarse, reference, epsilon)
    return float(np.hypot(h1_v, l2_q))
