import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from solitary import (
    ContractError,
    ConvergedBy,
    DegenerateCycleError,
    ExtrapolationConfig,
    Field,
    Fractional,
    Grid,
    ProblemSpec,
    accelerated_solve,
    mpe_extrapolate,
    residual,
    solve,
)
from solitary.extrapolation import mpe_weights

DESK = Grid(256.0, 4096)


def spec(alpha, p=1, **kw):
    return ProblemSpec(DESK, p=p, c=1.0, symbol=Fractional(alpha), **kw)


def linear_iterates(A, b, x0, count):
    xs = [x0]
    for _ in range(count - 1):
        xs.append(A @ xs[-1] + b)
    return xs


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), dim=st.integers(1, 5))
def test_mpe_exact_on_low_dimensional_linear_map(seed, dim):
    # k+1 iterates of x -> A x + b with A of size <= k give the fixed point exactly
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    A = Q @ np.diag(rng.uniform(-0.8, 0.8, dim)) @ Q.T
    b = rng.standard_normal(dim)
    fixed = np.linalg.solve(np.eye(dim) - A, b)
    xs = linear_iterates(A, b, rng.standard_normal(dim), dim + 2)
    s = mpe_extrapolate(xs)
    assert np.allclose(s, fixed, rtol=1e-7, atol=1e-7)


def test_mpe_beats_last_iterate_on_slow_linear_map(rng):
    dim = 50
    A = np.diag(np.linspace(0.5, 0.95, dim))
    b = rng.standard_normal(dim)
    fixed = b / (1 - np.diag(A))
    xs = linear_iterates(A, b, np.zeros(dim), 8)
    s = mpe_extrapolate(xs)
    assert np.linalg.norm(s - fixed) < 0.1 * np.linalg.norm(xs[-1] - fixed)


def test_weights_sum_to_one(rng):
    cols = rng.standard_normal((30, 8))
    assert mpe_weights(cols).sum() == pytest.approx(1.0, abs=1e-12)


def test_stationary_sequence_returns_first():
    v = np.arange(5.0)
    assert np.array_equal(mpe_extrapolate([v, v, v]), v)


def test_geometric_scalar_sequence():
    # x_{n+1} = 0.5 x_n + 1 has limit 2
    xs = [0.0, 1.0, 1.5]
    assert mpe_extrapolate(xs)[0] == pytest.approx(2.0, abs=1e-14)


def test_degenerate_cycle_detected():
    # constant differences (eigenvalue one): c_0 = -1 cancels c_1 = 1
    with pytest.raises(DegenerateCycleError):
        mpe_weights(np.array([[0.0, 1.0, 2.0]]))


def test_field_input_and_grid_checks():
    g = Grid(1.0, 8)
    fs = [Field(g, np.full(8, v)) for v in (0.0, 1.0, 1.5)]
    out = mpe_extrapolate(fs)
    assert isinstance(out, Field) and np.allclose(out.values, 2.0)
    with pytest.raises(ContractError):
        mpe_extrapolate([fs[0], Field(Grid(2.0, 8), fs[1].values)])
    with pytest.raises(ContractError):
        mpe_extrapolate(fs[:1])


def test_config_validation():
    with pytest.raises(ContractError):
        ExtrapolationConfig(mw=0)
    with pytest.raises(ContractError):
        ExtrapolationConfig(mw=2.5)


# ---------------------------------------------------------- accelerated solve

@pytest.mark.parametrize("alpha", [0.5, 0.7, 1.0, 1.5, 2.0])
def test_accelerated_agrees_with_plain(alpha):
    s = spec(alpha)
    plain = solve(s)
    fast = accelerated_solve(s)
    assert plain.report.converged and fast.report.converged
    assert fast.report.iterations < plain.report.iterations or alpha == 2.0
    diff = np.max(np.abs(plain.profile.values - fast.profile.values))
    assert diff < 1e-8 * plain.amplitude
    assert residual(fast.profile, s) <= s.tol


def test_report_accounting():
    sol = accelerated_solve(spec(0.7), ExtrapolationConfig(mw=4))
    r = sol.report
    assert r.iterations == 5 * r.cycles
    assert len(r.residual_history) == r.cycles
    assert r.converged_by is ConvergedBy.RESIDUAL


def test_wider_window_needs_fewer_steps():
    s = spec(0.6)
    counts = [accelerated_solve(s, ExtrapolationConfig(mw=w)).report.iterations for w in (2, 6)]
    plain = solve(s).report.iterations
    assert counts[1] < counts[0] < plain


def test_safeguard_off_still_converges():
    sol = accelerated_solve(spec(1.0), ExtrapolationConfig(mw=6, safeguard=False))
    assert sol.report.converged
    assert sol.report.rejected_extrapolations == 0


def test_max_iter_reported():
    sol = accelerated_solve(spec(0.7, max_iter=7), ExtrapolationConfig(mw=6))
    assert sol.report.converged_by is ConvergedBy.MAX_ITER
    assert sol.report.iterations == 7
