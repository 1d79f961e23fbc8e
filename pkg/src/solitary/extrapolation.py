"""Minimal polynomial extrapolation (MPE) cycled around the Petviashvili map."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import ContractError, DegenerateCycleError, DegenerateIterateError
from .petviashvili import (
    ConvergedBy,
    IterationReport,
    ProblemSpec,
    ProfileSolution,
    _Operators,
    _initial_values,
    _stop_reason,
    make_solution,
)
from .spectral import Field

log = logging.getLogger(__name__)

# relative pivot size below which columns of the difference matrix are dropped
RANK_RTOL = 1e-12


@dataclass(frozen=True)
class ExtrapolationConfig:
    """``mw`` is the extrapolation width: each cycle takes mw + 1 base steps."""

    mw: int = 6
    safeguard: bool = True

    def __post_init__(self):
        if int(self.mw) != self.mw or self.mw < 1:
            raise ContractError(f"mw must be a positive integer, got {self.mw}")
        object.__setattr__(self, "mw", int(self.mw))


def mpe_weights(iterates: np.ndarray) -> np.ndarray:
    """MPE weights gamma_0..gamma_k for the columns psi_0..psi_{k+1} of ``iterates``.

    The unnormalized coefficients solve ``U c ~= -u_k`` in the least-squares
    sense, ``U = [u_0 ... u_{k-1}]`` with ``u_j = psi_{j+1} - psi_j``, with
    ``c_k = 1``.  The solve uses column-pivoted QR and drops columns whose
    pivot falls below ``RANK_RTOL`` times the leading one.
    """
    diffs = np.diff(iterates, axis=1)
    k = diffs.shape[1] - 1
    U, rhs = diffs[:, :k], -diffs[:, k]
    coef = np.zeros(k)
    if k > 0 and np.any(U):
        Q, R, piv = scipy.linalg.qr(U, mode="economic", pivoting=True)
        d = np.abs(np.diag(R))
        rank = int(np.sum(d > RANK_RTOL * d[0]))
        if rank:
            z = scipy.linalg.solve_triangular(R[:rank, :rank], Q[:, :rank].T @ rhs)
            coef[piv[:rank]] = z
    c = np.append(coef, 1.0)
    total = c.sum()
    if abs(total) <= 1e-14 * np.sum(np.abs(c)):
        raise DegenerateCycleError("MPE coefficients sum to zero; cannot normalize")
    return c / total


def mpe_extrapolate(iterates: Sequence) -> np.ndarray | Field:
    """Extrapolated limit ``sum_j gamma_j psi_j`` from ``psi_0..psi_{mw+1}``.

    Accepts Fields (returns a Field) or plain vectors.  A sequence whose
    differences all vanish is already stationary and ``psi_0`` is returned.
    """
    if len(iterates) < 2:
        raise ContractError("MPE needs at least two iterates")
    fields = isinstance(iterates[0], Field)
    if fields:
        grid = iterates[0].grid
        if any(f.grid != grid for f in iterates):
            raise ContractError("iterates live on different grids")
        cols = np.column_stack([f.values for f in iterates])
    else:
        cols = np.column_stack([np.atleast_1d(np.asarray(v, dtype=float)) for v in iterates])
    if not np.any(np.diff(cols, axis=1)):
        s = cols[:, 0].copy()
    else:
        gamma = mpe_weights(cols)
        s = cols[:, :-1] @ gamma
    return Field(grid, s) if fields else s


def accelerated_solve(
    spec: ProblemSpec,
    config: ExtrapolationConfig = ExtrapolationConfig(),
    guess: Optional[Field] = None,
) -> ProfileSolution:
    """Petviashvili iteration restarted from an MPE extrapolant every mw + 1 steps.

    The stopping controls are evaluated on the accepted iterate of each cycle
    and recorded once per cycle; ``report.iterations`` counts base steps.
    With ``config.safeguard`` the extrapolant is replaced by the last plain
    iterate whenever its residual is larger.
    """
    ops = _Operators(spec)
    phi = _initial_values(spec, guess)
    report = IterationReport()
    nh, m, res = ops.analyse(phi)
    while report.iterations < spec.max_iter:
        psi = [phi]
        for _ in range(config.mw + 1):
            psi.append(ops.advance(nh, m))
            report.iterations += 1
            nh, m, res = ops.analyse(psi[-1])
        accepted = psi[-1]
        try:
            cand = mpe_extrapolate(psi)
        except DegenerateCycleError:
            report.degenerate_cycles += 1
            cand = None
        if cand is not None:
            try:
                c_nh, c_m, c_res = ops.analyse(cand)
                usable = np.all(np.isfinite(cand)) and (c_m > 0 or spec.eps == int(spec.eps))
            except DegenerateIterateError:
                usable = False
            if usable and not (config.safeguard and c_res > res):
                accepted, nh, m, res = cand, c_nh, c_m, c_res
            else:
                report.rejected_extrapolations += 1
        diff = float(np.linalg.norm(accepted - phi))
        phi = accepted
        report.record(m, diff, res)
        reason = _stop_reason(spec, m, diff, res)
        if reason is not None:
            report.converged_by = reason
            break
    else:
        log.warning("accelerated iteration hit max_iter=%d (RES=%.3e)", spec.max_iter, res)
    if report.converged_by is not ConvergedBy.MAX_ITER:
        log.debug("converged after %d base steps (%d cycles)", report.iterations, report.cycles)
    return make_solution(phi, spec, report)
