"""Petviashvili iteration for solitary-wave profiles.

Solves ``beta(D) phi + c phi = phi**(p+1) / (p+1)`` on a periodic grid by the
fixed-point map

    phi_hat_{n+1}(k) = m(phi_n)**eps * N_hat(phi_n)(k) / (c + beta(xi_k)),

where ``m`` is the stabilizing factor ``(L phi, phi) / (N(phi), phi)``.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field as dc_field, replace
from typing import Optional

import numpy as np

from .errors import ContractError, DegenerateIterateError, NumericError
from .spectral import (
    DispersionSymbol,
    Field,
    Fractional,
    Grid,
    interpolant_peak,
    symbol_values,
)

log = logging.getLogger(__name__)

STOPPING_RULES = ("residual", "any")


class ConvergedBy(str, enum.Enum):
    STABILIZING_FACTOR = "stabilizing_factor"
    CONSECUTIVE_DIFF = "consecutive_diff"
    RESIDUAL = "residual"
    MAX_ITER = "max_iter"


@dataclass(frozen=True)
class ProblemSpec:
    """One instance of the profile equation plus solver controls.

    ``stopping`` selects how the three control sequences end the iteration:
    ``"residual"`` (default) stops once RES(n) <= tol; ``"any"`` stops as
    soon as any of |1 - m_n|, ERROR_c(n), RES(n) drops below tol.
    """

    grid: Grid
    p: int = 1
    c: float = 1.0
    symbol: DispersionSymbol = Fractional(2.0)
    eps: Optional[float] = None
    tol: float = 1e-10
    max_iter: int = 1000
    stopping: str = "residual"

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ContractError(f"p must be a positive integer, got {self.p}")
        object.__setattr__(self, "p", int(self.p))
        if not (math.isfinite(self.c) and self.c > 0):
            raise ContractError(f"wave speed must satisfy c > 0, got c={self.c}")
        if self.eps is None:
            object.__setattr__(self, "eps", (self.p + 1) / self.p)
        if not math.isfinite(self.eps):
            raise ContractError(f"eps must be finite, got {self.eps}")
        if not self.tol > 0:
            raise ContractError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ContractError(f"max_iter must be a positive integer, got {self.max_iter}")
        if self.stopping not in STOPPING_RULES:
            raise ContractError(f"stopping must be one of {STOPPING_RULES}")

    @property
    def optimal_eps(self) -> float:
        return (self.p + 1) / self.p

    @property
    def eps_in_convergence_range(self) -> bool:
        return 1.0 < self.eps < (self.p + 2) / self.p

    def with_(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)


@dataclass
class IterationReport:
    """Histories of the three stopping controls.

    ``iterations`` counts base Petviashvili steps; the histories hold one entry
    per accepted iterate (``cycles`` of them), which is one per step for the
    plain iteration and one per extrapolation cycle when accelerated.
    """

    iterations: int = 0
    cycles: int = 0
    m_history: list = dc_field(default_factory=list)
    diff_history: list = dc_field(default_factory=list)
    residual_history: list = dc_field(default_factory=list)
    converged_by: ConvergedBy = ConvergedBy.MAX_ITER
    rejected_extrapolations: int = 0
    degenerate_cycles: int = 0

    @property
    def converged(self) -> bool:
        return self.converged_by is not ConvergedBy.MAX_ITER

    def record(self, m: float, diff: float, res: float) -> None:
        self.m_history.append(float(m))
        self.diff_history.append(float(diff))
        self.residual_history.append(float(res))
        self.cycles += 1

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "cycles": self.cycles,
            "converged_by": self.converged_by.value,
            "m_history": self.m_history,
            "diff_history": self.diff_history,
            "residual_history": self.residual_history,
            "rejected_extrapolations": self.rejected_extrapolations,
            "degenerate_cycles": self.degenerate_cycles,
        }


@dataclass
class ProfileSolution:
    profile: Field
    spec: ProblemSpec
    report: IterationReport
    amplitude: float
    peak_position: float
    min_value: float

    @property
    def residual(self) -> float:
        return residual(self.profile, self.spec)


class _Operators:
    """Precomputed half-spectrum multipliers for one ProblemSpec."""

    def __init__(self, spec: ProblemSpec):
        grid = spec.grid
        self.n = grid.size
        self.p = spec.p
        self.eps = spec.eps
        self.lin = spec.c + symbol_values(spec.symbol, grid.rwavenumbers)
        if not np.all(np.isfinite(self.lin)):
            k = int(np.flatnonzero(~np.isfinite(self.lin))[0])
            raise NumericError(f"symbol overflows at mode k={k}")
        # Parseval weights turning half-spectrum sums into full-spectrum sums
        w = np.full(self.lin.size, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        self.weights = w

    def nonlin(self, v: np.ndarray) -> np.ndarray:
        with np.errstate(over="raise", invalid="raise"):
            try:
                return v ** (self.p + 1) / (self.p + 1)
            except FloatingPointError as exc:
                raise NumericError(f"overflow in nonlinearity: {exc}") from None

    def factor(self, vh: np.ndarray, nh: np.ndarray) -> float:
        num = float(np.sum(self.weights * self.lin * np.abs(vh) ** 2))
        # real part of the weighted half-spectrum sum equals the full-spectrum
        # sum; its imaginary part cancels exactly between modes k and N-k
        den = float(np.sum(self.weights * (nh * np.conj(vh)).real))
        if not abs(den) > 1e-14 * abs(num) or num == 0.0:
            raise DegenerateIterateError(
                f"stabilizing factor undefined: numerator {num:.3e}, denominator {den:.3e}"
            )
        return num / den

    def analyse(self, v: np.ndarray):
        """Transforms, stabilizing factor and residual of one iterate."""
        nv = self.nonlin(v)
        vh = np.fft.rfft(v)
        nh = np.fft.rfft(nv)
        m = self.factor(vh, nh)
        res = float(np.linalg.norm(np.fft.irfft(self.lin * vh, n=self.n) - nv))
        return nh, m, res

    def advance(self, nh: np.ndarray, m: float) -> np.ndarray:
        if m <= 0 and self.eps != int(self.eps):
            raise DegenerateIterateError(f"stabilizing factor {m:.3e} is not positive")
        new = np.fft.irfft(m ** self.eps * nh / self.lin, n=self.n)
        if not np.all(np.isfinite(new)):
            raise NumericError("Petviashvili step produced non-finite values")
        return new

    def step(self, v: np.ndarray) -> np.ndarray:
        nh = np.fft.rfft(self.nonlin(v))
        return self.advance(nh, self.factor(np.fft.rfft(v), nh))

    def m(self, v: np.ndarray) -> float:
        return self.factor(np.fft.rfft(v), np.fft.rfft(self.nonlin(v)))

    def residual(self, v: np.ndarray) -> float:
        lv = np.fft.irfft(self.lin * np.fft.rfft(v), n=self.n)
        return float(np.linalg.norm(lv - self.nonlin(v)))


def nonlinearity(field: Field, p: int) -> Field:
    """Pointwise ``phi**(p+1) / (p+1)``."""
    if int(p) != p or p < 1:
        raise ContractError(f"p must be a positive integer, got {p}")
    with np.errstate(over="raise", invalid="raise"):
        try:
            out = field.values ** (p + 1) / (p + 1)
        except FloatingPointError as exc:
            raise NumericError(f"overflow in nonlinearity: {exc}") from None
    return Field(field.grid, out)


def _check_grid(field: Field, spec: ProblemSpec) -> None:
    if field.grid != spec.grid:
        raise ContractError("field grid does not match the problem grid")


def stabilizing_factor(field: Field, spec: ProblemSpec) -> float:
    _check_grid(field, spec)
    return _Operators(spec).m(field.values)


def petviashvili_step(field: Field, spec: ProblemSpec) -> Field:
    _check_grid(field, spec)
    return Field(spec.grid, _Operators(spec).step(field.values))


def residual(field: Field, spec: ProblemSpec) -> float:
    """Euclidean norm of ``L_h phi - N_h(phi)`` at the nodes."""
    _check_grid(field, spec)
    return _Operators(spec).residual(field.values)


def initial_guess(spec: ProblemSpec) -> Field:
    """``A sech^2(sqrt(c) x / 2)`` with the exact gKdV amplitude A."""
    p, c = spec.p, spec.c
    amp = (c * (p + 1) * (p + 2) / 2.0) ** (1.0 / p)
    z = 0.5 * math.sqrt(c) * np.abs(spec.grid.nodes)
    # sech^2 written with exp(-2z) to stay finite for large |x|
    e = np.exp(-2.0 * z)
    return Field(spec.grid, amp * 4.0 * e / (1.0 + e) ** 2)


def _stop_reason(spec: ProblemSpec, m: float, diff: float, res: float):
    tol = spec.tol
    if spec.stopping == "residual":
        return ConvergedBy.RESIDUAL if res <= tol else None
    if abs(1.0 - m) <= tol:
        return ConvergedBy.STABILIZING_FACTOR
    if diff <= tol:
        return ConvergedBy.CONSECUTIVE_DIFF
    if res <= tol:
        return ConvergedBy.RESIDUAL
    return None


def _initial_values(spec: ProblemSpec, guess: Optional[Field]) -> np.ndarray:
    if guess is None:
        guess = initial_guess(spec)
    _check_grid(guess, spec)
    if not np.any(guess.values):
        raise ContractError("initial guess is identically zero; stabilizing factor undefined")
    return np.array(guess.values)


def make_solution(values: np.ndarray, spec: ProblemSpec, report: IterationReport) -> ProfileSolution:
    profile = Field(spec.grid, values)
    try:
        amp, pos = interpolant_peak(profile)
    except Exception:
        j = int(np.argmax(values))
        amp, pos = float(values[j]), float(spec.grid.nodes[j])
    return ProfileSolution(
        profile=profile,
        spec=spec,
        report=report,
        amplitude=amp,
        peak_position=pos,
        min_value=float(values.min()),
    )


def solve(spec: ProblemSpec, guess: Optional[Field] = None) -> ProfileSolution:
    """Run the plain Petviashvili iteration until the stopping rule fires.

    Hitting ``max_iter`` is reported through ``converged_by`` rather than
    raised.
    """
    ops = _Operators(spec)
    phi = _initial_values(spec, guess)
    report = IterationReport()
    nh, m, res = ops.analyse(phi)
    for _ in range(spec.max_iter):
        new = ops.advance(nh, m)
        report.iterations += 1
        diff = float(np.linalg.norm(new - phi))
        phi = new
        nh, m, res = ops.analyse(phi)
        report.record(m, diff, res)
        reason = _stop_reason(spec, m, diff, res)
        if reason is not None:
            report.converged_by = reason
            break
    else:
        log.warning("Petviashvili iteration hit max_iter=%d (RES=%.3e)", spec.max_iter, res)
    return make_solution(phi, spec, report)
