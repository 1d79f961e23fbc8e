import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bo_candidate, bo_profile_residual, kdv_soliton, kdv_soliton_curvature
from solitary import (
    ContractError,
    ConvergedBy,
    DegenerateIterateError,
    Field,
    Fractional,
    Grid,
    ProblemSpec,
    WhithamExtended,
    accelerated_solve,
    apply_operator,
    initial_guess,
    nonlinearity,
    petviashvili_step,
    residual,
    solve,
    stabilizing_factor,
)

DESK = Grid(256.0, 4096)


def spec(alpha=2.0, p=1, c=1.0, grid=DESK, **kw):
    return ProblemSpec(grid, p=p, c=c, symbol=Fractional(alpha), **kw)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


# ---------------------------------------------------------------- nonlinearity

def test_nonlinearity_examples():
    g = Grid(1.0, 8)
    assert np.all(nonlinearity(Field(g, np.full(8, 2.0)), 1).values == 2.0)
    assert np.all(nonlinearity(Field(g, np.zeros(8)), 3).values == 0.0)
    with pytest.raises(ContractError):
        nonlinearity(Field(g, np.zeros(8)), 0)


@given(
    lam=st.floats(-4, 4, allow_nan=False),
    p=st.integers(1, 5),
    seed=st.integers(0, 2**31),
)
def test_nonlinearity_homogeneous(lam, p, seed):
    g = Grid(1.0, 16)
    f = Field(g, np.random.default_rng(seed).standard_normal(16))
    lhs = nonlinearity(Field(g, lam * f.values), p).values
    rhs = lam ** (p + 1) * nonlinearity(f, p).values
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-300)


# ------------------------------------------------------------- problem setup

def test_spec_defaults_and_validation():
    s = spec(p=2)
    assert s.eps == pytest.approx(1.5)
    assert s.eps_in_convergence_range
    with pytest.raises(ContractError, match="c > 0"):
        spec(c=-1.0)
    with pytest.raises(ContractError):
        spec(c=0.0)
    with pytest.raises(ContractError):
        spec(p=0)
    with pytest.raises(ContractError):
        spec(stopping="sometimes")


@pytest.mark.parametrize("p, peak", [(1, 3.0), (2, np.sqrt(6.0)), (3, 10.0 ** (1 / 3))])
def test_initial_guess_peak(p, peak):
    g = initial_guess(spec(p=p))
    assert g.values[DESK.size // 2] == pytest.approx(peak, rel=1e-14)


@settings(max_examples=20, deadline=None)
@given(p=st.integers(1, 5), c=st.floats(0.05, 5.0))
def test_initial_guess_even(p, c):
    v = initial_guess(spec(p=p, c=c)).values
    n = v.size
    assert np.array_equal(v[1:], v[:0:-1])
    assert np.all(np.isfinite(v)) and v.min() >= 0


# ----------------------------------------------------- factor, step, residual

@pytest.fixture(scope="module")
def kdv():
    return solve(spec())


def test_factor_at_fixed_point(kdv):
    assert stabilizing_factor(kdv.profile, kdv.spec) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("lam", [0.5, 2.0, 10.0])
def test_factor_scaling(kdv, lam):
    scaled = Field(DESK, lam * kdv.profile.values)
    m = stabilizing_factor(scaled, kdv.spec)
    assert m == pytest.approx(lam ** -1, rel=1e-10)


def test_factor_of_analytic_kdv_soliton():
    f = Field(DESK, kdv_soliton(DESK.nodes))
    assert stabilizing_factor(f, spec()) == pytest.approx(1.0, abs=1e-8)


def test_factor_degenerate():
    with pytest.raises(DegenerateIterateError):
        stabilizing_factor(Field(DESK, np.zeros(DESK.size)), spec())


def test_step_fixed_point(kdv):
    out = petviashvili_step(kdv.profile, kdv.spec)
    assert rel(out.values, kdv.profile.values) < 1e-10


@pytest.mark.parametrize("lam", [0.5, 2.0, 10.0])
def test_step_scaling_collapse(kdv, lam):
    out = petviashvili_step(Field(DESK, lam * kdv.profile.values), kdv.spec)
    assert rel(out.values, kdv.profile.values) < 1e-10


def test_step_of_small_random_field(rng):
    v = 1e-3 * rng.standard_normal(DESK.size)
    v -= v.mean()
    v += 1e-3 * initial_guess(spec()).values
    out = petviashvili_step(Field(DESK, v), spec())
    assert np.all(np.isfinite(out.values))


def test_residual_examples(kdv):
    assert residual(kdv.profile, kdv.spec) <= 1e-12 * kdv.profile.norm()
    assert residual(Field(DESK, np.zeros(DESK.size)), spec()) == 0.0


def test_residual_of_analytic_kdv_soliton():
    x = DESK.nodes
    f = Field(DESK, kdv_soliton(x))
    assert residual(f, spec()) < 1e-8
    # the discrete operator reproduces -phi'' of the analytic profile
    lf = apply_operator(f, Fractional(2.0)).values
    assert np.max(np.abs(lf + kdv_soliton_curvature(x))) < 1e-10


def test_grid_mismatch_is_rejected(kdv):
    with pytest.raises(ContractError):
        residual(Field(Grid(128.0, 4096), kdv.profile.values), kdv.spec)


# ----------------------------------------------------------------------- solve

def test_solve_kdv_amplitude(kdv):
    assert kdv.report.converged_by is ConvergedBy.RESIDUAL
    assert kdv.amplitude == pytest.approx(3.0, abs=1e-6)


def test_bo_candidate_is_a_solution():
    assert np.max(np.abs(bo_profile_residual([0.0, 0.3, 1.0, 2.5, 7.0]))) < 1e-6


def test_solve_benjamin_ono_amplitude():
    sol = accelerated_solve(spec(alpha=1.0, grid=Grid(1024.0, 2 ** 15)))
    assert sol.report.converged
    assert sol.amplitude == pytest.approx(4.0, abs=1e-4)
    # shape agrees with the algebraic soliton away from the periodic boundary
    x = sol.profile.grid.nodes
    core = np.abs(x) < 20
    assert np.max(np.abs(sol.profile.values[core] - bo_candidate(x[core]))) < 1e-2


def test_plain_solve_alpha07_converges():
    sol = solve(spec(alpha=0.7, max_iter=1000))
    assert sol.report.converged_by is not ConvergedBy.MAX_ITER


def test_max_iter_is_reported_not_raised():
    sol = solve(spec(alpha=0.7, max_iter=3))
    assert sol.report.converged_by is ConvergedBy.MAX_ITER
    assert sol.report.iterations == 3


def test_zero_guess_rejected():
    with pytest.raises(ContractError):
        solve(spec(), Field(DESK, np.zeros(DESK.size)))


def test_any_rule_stops_on_first_small_control():
    sol = solve(spec(alpha=0.7, stopping="any"))
    r = sol.report
    assert r.converged
    final = {
        ConvergedBy.STABILIZING_FACTOR: abs(1 - r.m_history[-1]),
        ConvergedBy.CONSECUTIVE_DIFF: r.diff_history[-1],
        ConvergedBy.RESIDUAL: r.residual_history[-1],
    }[r.converged_by]
    assert final <= sol.spec.tol


@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.5, 2.0])
def test_converged_invariants(alpha):
    sol = solve(spec(alpha=alpha))
    r = sol.report
    tol = sol.spec.tol
    assert len(r.m_history) == len(r.diff_history) == len(r.residual_history) == r.iterations
    assert abs(1 - stabilizing_factor(sol.profile, sol.spec)) <= 10 * tol
    assert residual(sol.profile, sol.spec) <= 10 * tol
    # monotone residual tail
    tail = np.array(r.residual_history[-10:])
    assert np.all(np.diff(tail) < 0)
    # profile even about its centered peak
    v = sol.profile.values
    assert np.max(np.abs(v[1:] - v[:0:-1])) <= 1e-8 * sol.amplitude
    # one more step barely moves a converged profile
    again = petviashvili_step(sol.profile, sol.spec)
    assert np.linalg.norm(again.values - v) <= 10 * tol


def test_whitham_extended_profile():
    s = ProblemSpec(DESK, p=1, c=1.0, symbol=WhithamExtended(0.5))
    sol = accelerated_solve(s)
    assert sol.report.converged
    assert residual(sol.profile, s) <= 10 * s.tol
    assert sol.amplitude > 0
