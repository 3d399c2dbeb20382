from pathlib import Path

import numpy as np
import pytest

from switchvi import shipped_problem
from switchvi.bilateral import solve_bilateral
from switchvi.model import ModeSpace, ProblemSpec
from switchvi.problemfile import load_problem

FIXTURES = Path(__file__).with_name("fixtures")

# acceptance lines collected by tests/test_acceptance.py, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def simple_problem(count1=1, count2=1, *, b="0", sigma="0", f="0", h="0", g_lower=None, g_upper=None,
                   T=1.0, name="simple"):
    """One-dimensional problem; f and h may be strings or {(i, j): expr} dicts."""
    modes = ModeSpace(count1, count2)
    pairs = modes.pairs
    f = f if isinstance(f, dict) else {p: f for p in pairs}
    h = h if isinstance(h, dict) else {p: h for p in pairs}

    def matrix(count, spec):
        if spec is None:
            spec = lambda a, c: "1"
        return [["0" if a == c else spec(a, c) for c in range(1, count + 1)] for a in range(1, count + 1)]

    return ProblemSpec(1, 1, T, modes, [b], [[sigma]], f, matrix(count1, g_lower), matrix(count2, g_upper), h,
                       name=name)


@pytest.fixture(scope="session")
def d1_file():
    return load_problem(shipped_problem("d1"))


@pytest.fixture(scope="session")
def d1(d1_file):
    return d1_file.problem


@pytest.fixture(scope="session")
def d1_grid(d1_file):
    return d1_file.grid()


@pytest.fixture(scope="session")
def d1_min(d1, d1_grid):
    return solve_bilateral(d1, d1_grid, "min_first")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
