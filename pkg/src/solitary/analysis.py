"""Wave metrology and parameter studies built on the solvers."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .errors import DegenerateFitError, DomainError, SolitaryError
from .extrapolation import ExtrapolationConfig, accelerated_solve
from .petviashvili import ProblemSpec, solve
from .spectral import Field, Fractional, interpolant_peak, spectral_derivative

log = logging.getLogger(__name__)


def amplitude(profile: Field) -> tuple[float, float]:
    """Height and position of the continuous maximum of ``profile``."""
    return interpolant_peak(profile)


@dataclass(frozen=True)
class SweepSpec:
    """Speed-amplitude study for one nonlinearity power over several alphas.

    ``template`` supplies grid and solver controls; its p, c and symbol are
    overridden per row.  ``config=None`` runs the plain iteration.
    """

    p: int
    alphas: tuple
    speeds: tuple
    template: ProblemSpec
    config: Optional[ExtrapolationConfig] = ExtrapolationConfig()

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "speeds", tuple(float(c) for c in self.speeds))
        if not self.alphas or not self.speeds:
            raise DomainError("sweep needs at least one alpha and one speed")
        if any(not c > 0 for c in self.speeds):
            raise DomainError("all speeds must be positive")
        limit = self.p / (self.p + 2)
        for a in self.alphas:
            if a < limit - 1e-6:
                raise DomainError(
                    f"alpha={a} below the existence limit p/(p+2)={limit:.6g} for p={self.p}"
                )


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    p: int
    c: float
    amplitude: float
    iterations: int
    converged: bool
    error: str = ""


def _sweep_alpha(args) -> list[SweepRow]:
    alpha, sweep = args
    rows = []
    guess = None
    for c in sorted(sweep.speeds):
        spec = sweep.template.with_(p=sweep.p, c=c, symbol=Fractional(alpha), eps=None)
        try:
            if sweep.config is None:
                sol = solve(spec, guess)
            else:
                sol = accelerated_solve(spec, sweep.config, guess)
        except SolitaryError as exc:
            log.warning("sweep row alpha=%g p=%d c=%g failed: %s", alpha, sweep.p, c, exc)
            rows.append(SweepRow(alpha, sweep.p, c, math.nan, 0, False, str(exc)))
            guess = None
            continue
        rows.append(
            SweepRow(alpha, sweep.p, c, sol.amplitude, sol.report.iterations, sol.report.converged)
        )
        # continuation in c: warm start from a converged neighbour only
        guess = sol.profile if sol.report.converged else None
    return rows


def speed_amplitude_sweep(sweep: SweepSpec, jobs: int = 1) -> list[SweepRow]:
    """Amplitude for every (alpha, c) pair, sorted by (alpha, p, c).

    Speeds are visited in increasing order for each alpha, each solve warm
    started from the previous converged profile.  Alphas are independent and
    run in separate processes when ``jobs > 1``.
    """
    tasks = [(a, sweep) for a in sorted(set(sweep.alphas))]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            groups = list(pool.map(_sweep_alpha, tasks))
    else:
        groups = [_sweep_alpha(t) for t in tasks]
    rows = [r for g in groups for r in g]
    return sorted(rows, key=lambda r: (r.alpha, r.p, r.c))


@dataclass(frozen=True)
class FitResult:
    a: float
    b: float
    sse: float
    r_squared: float
    rmse: float
    n_points: int

    def as_dict(self) -> dict:
        return asdict(self)

    def accepted(self, sse_threshold: float = 1e-6) -> bool:
        return self.sse <= sse_threshold


def _fit_stats(x, y, a, b) -> FitResult:
    resid = y - a * x ** b
    sse = float(np.sum(resid ** 2))
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else (1.0 if sse == 0 else -math.inf)
    n = x.size
    rmse = math.sqrt(sse / (n - 2)) if n > 2 else math.nan
    return FitResult(float(a), float(b), sse, r2, rmse, n)


def fit_power_law(points, max_iter: int = 100, rtol: float = 1e-12) -> FitResult:
    """Least-squares fit of ``y = a x**b``.

    Starts from the log-log linear regression, then runs Gauss-Newton on the
    untransformed sum of squared errors.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError("points must be a sequence of (x, y) pairs")
    x, y = pts[:, 0], pts[:, 1]
    if x.size < 3:
        raise DomainError(f"power-law fit needs at least 3 points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(pts)):
        raise DomainError("power-law fit requires positive finite data")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([np.ones_like(lx), lx])
    if np.linalg.matrix_rank(A) < 2:
        raise DegenerateFitError("all x values coincide")
    (ln_a, b), *_ = np.linalg.lstsq(A, ly, rcond=None)
    a = math.exp(ln_a)

    sse = float(np.sum((y - a * x ** b) ** 2))
    for _ in range(max_iter):
        xb = x ** b
        r = y - a * xb
        J = np.column_stack([xb, a * xb * lx])
        if np.linalg.matrix_rank(J) < 2:
            raise DegenerateFitError("singular Gauss-Newton normal equations")
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        # halve until the SSE does not grow
        t = 1.0
        while t > 1e-6:
            a_new, b_new = a + t * step[0], b + t * step[1]
            sse_new = float(np.sum((y - a_new * x ** b_new) ** 2))
            if sse_new <= sse:
                break
            t *= 0.5
        else:
            break
        done = sse - sse_new <= rtol * max(sse, 1e-300)
        a, b, sse = a_new, b_new, sse_new
        if done:
            break
    return _fit_stats(x, y, a, b)


def phase_portrait(profile: Field) -> np.ndarray:
    """Array of shape (N, 2): columns phi and its spectral derivative."""
    dphi = spectral_derivative(profile).values
    return np.column_stack([profile.values, dphi])


def decay_exponent(profile: Field, window: Optional[tuple] = None) -> float:
    """Slope of ``log phi`` against ``log x`` over the nodes in ``window``.

    The default window ``(l/8, l/4)`` keeps clear of the core and of the
    periodic boundary.
    """
    grid = profile.grid
    l = grid.half_length
    lo, hi = window if window is not None else (l / 8, l / 4)
    if not (0 < lo < hi <= l):
        raise DomainError(f"window ({lo}, {hi}) must lie inside (0, {l}]")
    x = grid.nodes
    mask = (x >= lo) & (x <= hi)
    if mask.sum() < 2:
        raise DomainError("window contains fewer than two nodes")
    v = profile.values[mask]
    if np.any(v <= 0):
        raise DomainError("profile is not positive on the decay window")
    slope, _ = np.polyfit(np.log(x[mask]), np.log(v), 1)
    return float(slope)

