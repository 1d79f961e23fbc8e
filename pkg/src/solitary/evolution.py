"""Time integration of ``u_t + (u^{p+1}/(p+1))_x - (beta(D) u)_x = 0``.

Space is Fourier pseudospectral on the periodic grid; time stepping is the
triple-jump composition of the implicit midpoint rule (fourth order,
symmetric, and exact on quadratic invariants up to aliasing).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, InnerSolveError, MeasurementError
from .spectral import (
    DispersionSymbol,
    Field,
    Fractional,
    Grid,
    apply_operator,
    derivative_multiplier,
    interpolant_peak,
    symbol_values,
)

MAX_INNER = 100

# triple-jump substep fractions
GAMMA1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
GAMMA2 = 1.0 - 2.0 * GAMMA1
GAMMAS = (GAMMA1, GAMMA2, GAMMA1)


@dataclass(frozen=True)
class EvolutionSpec:
    grid: Grid
    p: int = 1
    symbol: DispersionSymbol = Fractional(2.0)
    dt: float = 1e-2
    t_final: float = 1.0
    inner_tol: float = 1e-12
    snapshot_stride: int = 1
    dealias: bool = False

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ContractError(f"p must be a positive integer, got {self.p}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ContractError(f"dt must be positive, got {self.dt}")
        if not self.t_final > 0:
            raise ContractError(f"t_final must be positive, got {self.t_final}")
        if self.dt > self.t_final * (1 + 1e-12):
            raise ContractError("dt must not exceed t_final")
        if not self.inner_tol > 0:
            raise ContractError("inner_tol must be positive")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ContractError("snapshot_stride must be a positive integer")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_final / self.dt)))


@dataclass(frozen=True)
class ConservedDiagnostics:
    C: float
    M: float
    E: float


@dataclass
class Trajectory:
    times: list = dc_field(default_factory=list)
    snapshots: list = dc_field(default_factory=list)
    diagnostics: list = dc_field(default_factory=list)
    amplitude_series: list = dc_field(default_factory=list)
    peak_position_series: list = dc_field(default_factory=list)

    def append(self, t: float, u: Field, diag: Optional[ConservedDiagnostics]) -> None:
        if self.times and not t > self.times[-1]:
            raise ContractError("trajectory times must be strictly increasing")
        amp, pos = peak_or_nan(u)
        self.times.append(float(t))
        self.snapshots.append(u)
        self.diagnostics.append(diag)
        self.amplitude_series.append(amp)
        self.peak_position_series.append(pos)

    def __len__(self) -> int:
        return len(self.times)


def peak_or_nan(u: Field) -> tuple[float, float]:
    """Refined peak, or (grid max, nan) when the maximum is not unique."""
    try:
        return interpolant_peak(u)
    except MeasurementError:
        return float(np.max(u.values)), math.nan


class _Stepper:
    def __init__(self, spec: EvolutionSpec):
        grid = spec.grid
        self.n = grid.size
        self.p = spec.p
        self.tol = spec.inner_tol
        self.ik = derivative_multiplier(grid)
        self.disp = self.ik * symbol_values(spec.symbol, grid.rwavenumbers)
        if spec.dealias:
            mask = np.arange(self.ik.size) <= self.n // 3
            self.ik_nl = self.ik * mask
        else:
            self.ik_nl = self.ik

    def flux_hat(self, v: np.ndarray) -> np.ndarray:
        return np.fft.rfft(v ** (self.p + 1) / (self.p + 1))

    def rhs(self, u: np.ndarray) -> np.ndarray:
        uh = np.fft.rfft(u)
        return np.fft.irfft(self.disp * uh - self.ik_nl * self.flux_hat(u), n=self.n)

    def midpoint(self, u: np.ndarray, tau: float) -> np.ndarray:
        # midpoint value w = (u + u+)/2 solves w = u + tau/2 * rhs(w); the
        # dispersive part is inverted exactly, the flux is iterated
        uh = np.fft.rfft(u)
        half = 0.5 * tau
        den = 1.0 - half * self.disp
        a = uh / den
        b = (half * self.ik_nl) / den
        w = np.fft.irfft(a - b * self.flux_hat(u), n=self.n)
        tol = max(self.tol, 64 * np.finfo(float).eps * np.linalg.norm(u))
        for _ in range(MAX_INNER):
            w_new = np.fft.irfft(a - b * self.flux_hat(w), n=self.n)
            delta = 2.0 * np.linalg.norm(w_new - w)
            w = w_new
            if delta <= tol:
                return 2.0 * w - u
            if not math.isfinite(delta):
                break
        raise InnerSolveError(
            f"implicit midpoint stage (tau={tau:.3g}) did not converge in "
            f"{MAX_INNER} iterations; reduce dt"
        )

    def composed(self, u: np.ndarray, dt: float) -> np.ndarray:
        for g in GAMMAS:
            u = self.midpoint(u, g * dt)
        return u


def _values(u: Field, spec: EvolutionSpec) -> np.ndarray:
    if u.grid != spec.grid:
        raise ContractError("field grid does not match the evolution grid")
    return u.values


def rhs(u: Field, spec: EvolutionSpec) -> Field:
    """``-d/dx (u^{p+1}/(p+1)) + d/dx (beta(D) u)``, pseudospectral."""
    return Field(spec.grid, _Stepper(spec).rhs(_values(u, spec)))


def step_implicit_midpoint(u: Field, tau: float, spec: EvolutionSpec) -> Field:
    if tau == 0:
        raise ContractError("midpoint step size must be nonzero")
    return Field(spec.grid, _Stepper(spec).midpoint(_values(u, spec), tau))


def step_composed(u: Field, spec: EvolutionSpec, dt: Optional[float] = None) -> Field:
    """One step of size ``dt`` (default ``spec.dt``); negative dt runs backward."""
    dt = spec.dt if dt is None else dt
    return Field(spec.grid, _Stepper(spec).composed(_values(u, spec), dt))


def diagnostics(u: Field, p: int, symbol: DispersionSymbol) -> ConservedDiagnostics:
    """Trapezoidal-rule values of the mass, L2 norm and Hamiltonian."""
    h = u.grid.spacing
    v = u.values
    half = apply_operator(u, symbol, 0.5).values
    energy = 0.5 * half ** 2 - v ** (p + 2) / ((p + 1) * (p + 2))
    return ConservedDiagnostics(
        C=float(h * np.sum(v)),
        M=float(h * np.sum(v * v)),
        E=float(h * np.sum(energy)),
    )


def evolve(initial: Field, spec: EvolutionSpec) -> Trajectory:
    """Integrate to ``t_final`` recording every ``snapshot_stride`` steps."""
    stepper = _Stepper(spec)
    u = np.array(_values(initial, spec))
    n_steps = spec.n_steps
    dt = spec.t_final / n_steps
    traj = Trajectory()
    traj.append(0.0, initial, diagnostics(initial, spec.p, spec.symbol))
    for n in range(1, n_steps + 1):
        u = stepper.composed(u, dt)
        if n % spec.snapshot_stride == 0:
            snap = Field(spec.grid, u)
            traj.append(n * dt, snap, diagnostics(snap, spec.p, spec.symbol))
    return traj


def trajectory_from_snapshots(times: Sequence[float], snapshots: Sequence[Field]) -> Trajectory:
    """Wrap externally produced snapshots for peak tracking (no diagnostics)."""
    traj = Trajectory()
    for t, u in zip(times, snapshots):
        traj.append(t, u, None)
    return traj


def unwrapped_positions(traj: Trajectory) -> np.ndarray:
    pos = np.asarray(traj.peak_position_series, dtype=float)
    if np.any(~np.isfinite(pos)):
        raise MeasurementError("peak position undefined in at least one snapshot")
    period = 2.0 * traj.snapshots[0].grid.half_length
    return np.unwrap(pos, period=period)


def measure_speed(traj: Trajectory) -> float:
    """Least-squares slope of the unwrapped peak position against time."""
    if len(traj) < 2:
        raise ContractError("speed measurement needs at least two snapshots")
    pos = unwrapped_positions(traj)
    t = np.asarray(traj.times, dtype=float)
    slope, _ = np.polyfit(t, pos, 1)
    return float(slope)
