import numpy as np
import pytest

from solitary import ExtrapolationConfig, Fractional, Grid, ProblemSpec, accelerated_solve

DESK = Grid(256.0, 4096)

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def desk_grid():
    return DESK


_cache = {}


def converged_profile(alpha, p=1, c=1.0, grid=DESK, mw=6):
    key = (alpha, p, c, grid, mw)
    if key not in _cache:
        spec = ProblemSpec(grid, p=p, c=c, symbol=Fractional(alpha))
        _cache[key] = accelerated_solve(spec, ExtrapolationConfig(mw))
    return _cache[key]


@pytest.fixture(scope="session")
def solved():
    return converged_profile


@pytest.fixture
def rng():
    return np.random.default_rng(20180415)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.split(".")[0]), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
