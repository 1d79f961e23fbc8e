"""Solitary waves of fractional KdV and Whitham-type equations.

Profiles are computed by the Petviashvili iteration, optionally accelerated
with minimal polynomial extrapolation, and can be validated by a fourth-order
geometric time integrator.

>>> from solitary import Grid, Fractional, ProblemSpec, accelerated_solve
>>> spec = ProblemSpec(Grid(256, 4096), p=1, c=1.0, symbol=Fractional(2.0))
>>> round(accelerated_solve(spec).amplitude, 6)
3.0
"""
from .errors import (
    ContractError,
    DegenerateCycleError,
    DegenerateFitError,
    DegenerateIterateError,
    DomainError,
    InnerSolveError,
    MeasurementError,
    NumericError,
    SolitaryError,
)
from .spectral import (
    DispersionSymbol,
    Field,
    Fractional,
    Grid,
    WhithamExtended,
    apply_operator,
    eval_symbol,
    forward_transform,
    inverse_transform,
    spectral_derivative,
)
from .petviashvili import (
    ConvergedBy,
    IterationReport,
    ProblemSpec,
    ProfileSolution,
    initial_guess,
    nonlinearity,
    petviashvili_step,
    residual,
    solve,
    stabilizing_factor,
)
from .extrapolation import ExtrapolationConfig, accelerated_solve, mpe_extrapolate
from .evolution import (
    ConservedDiagnostics,
    EvolutionSpec,
    Trajectory,
    diagnostics,
    evolve,
    measure_speed,
    rhs,
    step_composed,
    step_implicit_midpoint,
    trajectory_from_snapshots,
)
from .analysis import (
    FitResult,
    SweepRow,
    SweepSpec,
    amplitude,
    decay_exponent,
    fit_power_law,
    phase_portrait,
    speed_amplitude_sweep,
)

__version__ = "0.1.0"
