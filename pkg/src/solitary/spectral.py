"""Periodic collocation grid, discrete Fourier transforms and Fourier multipliers.

Everything here works on the interval (-l, l) sampled at ``x_j = -l + j*h``
with ``h = 2l/N``.  Forward transforms are normalized by ``1/N`` so the
mode-0 coefficient is the sample mean.  Multipliers are applied on the
signed wavenumbers ``xi_k = (pi/l) * k~`` with ``k~`` in ``[-N/2, N/2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .errors import ContractError, DomainError, MeasurementError, NumericError

__all__ = [
    "Grid",
    "Fractional",
    "WhithamExtended",
    "DispersionSymbol",
    "Field",
    "eval_symbol",
    "symbol_values",
    "apply_operator",
    "spectral_derivative",
    "forward_transform",
    "inverse_transform",
    "interpolant_peak",
]

# below this |xi| the Whitham factor tanh(xi)/xi is evaluated by its Taylor series
WHITHAM_SERIES_CUTOFF = 1e-4


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on (-half_length, half_length) with ``size`` nodes."""

    half_length: float
    size: int

    def __post_init__(self):
        if not (math.isfinite(self.half_length) and self.half_length > 0):
            raise ContractError(f"half_length must be positive, got {self.half_length}")
        if int(self.size) != self.size or self.size <= 0 or self.size % 2:
            raise ContractError(f"size must be a positive even integer, got {self.size}")
        object.__setattr__(self, "half_length", float(self.half_length))
        object.__setattr__(self, "size", int(self.size))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / self.size

    @cached_property
    def nodes(self) -> np.ndarray:
        x = -self.half_length + np.arange(self.size) * self.spacing
        x.setflags(write=False)
        return x

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Signed wavenumbers in FFT order; index N/2 carries -N/2 * pi/l."""
        k = np.fft.fftfreq(self.size, d=1.0 / self.size)
        xi = k * (math.pi / self.half_length)
        xi.setflags(write=False)
        return xi

    @cached_property
    def rwavenumbers(self) -> np.ndarray:
        """Nonnegative wavenumbers matching ``numpy.fft.rfft`` output."""
        xi = np.arange(self.size // 2 + 1) * (math.pi / self.half_length)
        xi.setflags(write=False)
        return xi

    def field(self, values) -> "Field":
        return Field(self, values)

    def sample(self, func) -> "Field":
        return Field(self, func(self.nodes))


@dataclass(frozen=True)
class Fractional:
    """Symbol ``|xi|**alpha`` of the fractional derivative ``D^alpha``."""

    alpha: float

    def __post_init__(self):
        if not math.isfinite(self.alpha):
            raise DomainError(f"alpha must be finite, got {self.alpha}")


@dataclass(frozen=True)
class WhithamExtended:
    """Symbol ``sqrt(1 + gamma xi^2) * sqrt(tanh(xi)/xi)``; gamma=0 is Whitham."""

    gamma: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise DomainError(f"gamma must be nonnegative, got {self.gamma}")


DispersionSymbol = Union[Fractional, WhithamExtended]


def _tanhc(a: np.ndarray) -> np.ndarray:
    # tanh(a)/a for a >= 0
    out = np.empty_like(a)
    small = a < WHITHAM_SERIES_CUTOFF
    a2 = a[small] ** 2
    out[small] = 1.0 - a2 / 3.0 + 2.0 * a2 * a2 / 15.0
    big = ~small
    out[big] = np.tanh(a[big]) / a[big]
    return out


def symbol_values(symbol: DispersionSymbol, xi) -> np.ndarray:
    """Vectorized symbol evaluation; ``xi`` may have any sign."""
    a = np.abs(np.asarray(xi, dtype=float))
    if not np.all(np.isfinite(a)):
        raise DomainError("symbol evaluated at a non-finite wavenumber")
    if isinstance(symbol, Fractional):
        if symbol.alpha > 0:
            with np.errstate(over="ignore"):
                return a ** symbol.alpha
        with np.errstate(divide="ignore", over="ignore"):
            out = a ** symbol.alpha
        # mode 0 carries no information for a nonpositive exponent either
        return np.where(a == 0, 0.0, out)
    if isinstance(symbol, WhithamExtended):
        return np.sqrt(1.0 + symbol.gamma * a * a) * np.sqrt(_tanhc(a))
    raise TypeError(f"unknown dispersion symbol {symbol!r}")


def eval_symbol(symbol: DispersionSymbol, xi: float) -> float:
    """Return ``beta(|xi|)`` for a scalar wavenumber."""
    return float(symbol_values(symbol, np.array([xi]))[0])


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a function at the nodes of ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ContractError(
                f"field has shape {v.shape}, grid expects ({self.grid.size},)"
            )
        if not np.all(np.isfinite(v)):
            raise NumericError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self) -> int:
        return self.grid.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def _as_values(field, grid: Grid | None = None) -> np.ndarray:
    if isinstance(field, Field):
        if grid is not None and field.grid != grid:
            raise ContractError("field lives on a different grid")
        return field.values
    return np.asarray(field, dtype=float)


def forward_transform(field: Field) -> np.ndarray:
    """Discrete Fourier coefficients ``(1/N) F_N phi`` in FFT order."""
    return np.fft.fft(field.values) / field.grid.size


def inverse_transform(coefficients, grid: Grid) -> Field:
    coefficients = np.asarray(coefficients)
    if coefficients.shape != (grid.size,):
        raise ContractError(
            f"expected {grid.size} coefficients, got shape {coefficients.shape}"
        )
    z = np.fft.ifft(coefficients * grid.size)
    return Field(grid, _realize(z))


def _realize(z: np.ndarray) -> np.ndarray:
    scale = max(np.linalg.norm(z.real), 1e-300)
    if np.linalg.norm(z.imag) > 1e-12 * scale and np.linalg.norm(z.imag) > 1e-280:
        raise NumericError(
            "inverse transform is not real; coefficients lack conjugate symmetry"
        )
    return z.real


def multiplier(grid: Grid, symbol: DispersionSymbol, power: float = 1.0) -> np.ndarray:
    """``beta(xi_k)**power`` on the rfft half-spectrum."""
    beta = symbol_values(symbol, grid.rwavenumbers)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        mult = beta ** power
    if power < 0:
        mult = np.where(beta == 0, 0.0, mult)
    bad = np.flatnonzero(~np.isfinite(mult))
    if bad.size:
        k = int(bad[0])
        raise NumericError(
            f"multiplier overflows at mode k={k} (xi={grid.rwavenumbers[k]:.6g})"
        )
    return mult


def apply_operator(field: Field, symbol: DispersionSymbol, power: float = 1.0) -> Field:
    """Apply the Fourier multiplier ``beta(xi)**power`` to a real field."""
    grid = field.grid
    mult = multiplier(grid, symbol, power)
    spec = np.fft.rfft(field.values) * mult
    out = np.fft.irfft(spec, n=grid.size)
    if not np.all(np.isfinite(out)):
        k = int(np.flatnonzero(~np.isfinite(spec))[0]) if not np.all(np.isfinite(spec)) else -1
        raise NumericError(f"operator output is non-finite (first bad mode k={k})")
    return Field(grid, out)


def derivative_multiplier(grid: Grid) -> np.ndarray:
    """``i*xi`` on the rfft half-spectrum with the Nyquist mode zeroed."""
    ik = 1j * grid.rwavenumbers
    ik[-1] = 0.0
    return ik


def spectral_derivative(field: Field) -> Field:
    grid = field.grid
    spec = np.fft.rfft(field.values) * derivative_multiplier(grid)
    return Field(grid, np.fft.irfft(spec, n=grid.size))


def _interpolant_derivs(coef: np.ndarray, xi: np.ndarray, s: float):
    # first and second derivative of the real trig interpolant at offset s = x - x_0
    n = coef.size
    c = coef.copy()
    c[n // 2] = 0.0
    e = np.exp(1j * xi * s)
    d1 = np.sum(1j * xi * c * e).real
    d2 = np.sum(-(xi ** 2) * c * e).real
    # Nyquist term contributes c_N/2 * cos(xi_N/2 * s)
    kn = abs(xi[n // 2])
    cn = coef[n // 2].real
    d1 += -cn * kn * math.sin(kn * s)
    d2 += -cn * kn * kn * math.cos(kn * s)
    return d1, d2


def interpolant_value(field: Field, x: float) -> float:
    """Evaluate the trigonometric interpolant of ``field`` at ``x``."""
    grid = field.grid
    coef = forward_transform(field)
    xi = grid.wavenumbers
    s = x - grid.nodes[0]
    n = grid.size
    c = coef.copy()
    c[n // 2] = 0.0
    val = np.sum(c * np.exp(1j * xi * s)).real
    kn = abs(xi[n // 2])
    return float(val + coef[n // 2].real * math.cos(kn * s))


def interpolant_peak(field: Field, max_newton: int = 30) -> tuple[float, float]:
    """Continuous maximum of the trig interpolant near the grid maximum.

    Returns ``(height, position)``.  Newton iteration is run on the root of the
    interpolant's derivative starting at the best node; if it leaves the cell
    ``[x_j - h, x_j + h]`` or fails to converge, the grid maximum is returned.
    Raises MeasurementError if the grid maximum is not unique (ties that are
    not a single pair of neighbouring nodes).
    """
    v = field.values
    grid = field.grid
    n = grid.size
    j = int(np.argmax(v))
    vmax = v[j]
    ties = np.flatnonzero(v >= vmax - 1e-13 * max(abs(vmax), 1e-300))
    if ties.size > 1:
        # a pair of neighbours (cyclically) brackets an interior peak
        pair = ties.size == 2 and (
            ties[1] - ties[0] == 1 or (ties[0] == 0 and ties[1] == n - 1)
        )
        if not pair:
            raise MeasurementError(
                f"maximum is attained at {ties.size} separated nodes; peak is ambiguous"
            )
    h = grid.spacing
    x0 = grid.nodes[j]
    coef = forward_transform(field)
    xi = grid.wavenumbers
    s0 = x0 - grid.nodes[0]
    s = s0
    for _ in range(max_newton):
        d1, d2 = _interpolant_derivs(coef, xi, s)
        if d2 >= 0:
            break
        ds = -d1 / d2
        s += ds
        if abs(s - s0) > h:
            break
        if abs(ds) <= 1e-12 * h:
            x = grid.nodes[0] + s
            height = interpolant_value(field, x)
            if height < vmax:
                break
            return height, float(x)
    return float(vmax), float(x0)
