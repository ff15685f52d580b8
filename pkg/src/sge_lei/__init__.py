"""Exponential-integrator Fourier pseudospectral solver for the weakly
nonlinear sine-Gordon equation, with a convergence-study harness."""

from .spectral_core import (
    TRANSFORM_STATS,
    PeriodicGrid,
    SpectralField,
    apply_nabla_bracket,
    forward_transform,
    inverse_transform,
    resample,
    sobolev_norm,
)
from .model import (
    FieldPair,
    InitialData,
    ModelParams,
    PsiState,
    RealnessError,
    assemble_psi0,
    big_F,
    energy,
    load_tabulated,
    nonlinearity_f,
    nonlinearity_g,
    recover_wz,
)
from .integrator import (
    HorizonError,
    NumericalBlowupError,
    Observer,
    StepParams,
    Trajectory,
    duhamel_oracle,
    evolve,
    lei_step,
    reference_solve,
    trajectory_to_binary,
    trajectory_to_csv,
)
from .oscillatory import OscState, osc_error, osc_error_parts, solve_oscillatory
from .experiments import (
    ConvergenceTable,
    ErrorRecord,
    error_norm,
    fit_order,
    least_squares_slope,
    spatial_sweep,
    table1_sweep,
    temporal_sweep,
)

__version__ = "0.1.0"
