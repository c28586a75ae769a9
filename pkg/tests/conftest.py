import functools
import math

import pytest
from hypothesis import settings

from fkdv.kernel import SymbolSpec
from fkdv.solitary import construct_solitary
from fkdv.solver import continue_branch, solve_highest_wave

settings.register_profile("fkdv", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("fkdv")

TWO_PI = 2.0 * math.pi
REGRESSION_LAMBDAS = (0.25, 0.5, 0.75, 0.95)


@functools.lru_cache(maxsize=None)
def regression_branch(s, P=TWO_PI, N=1024):
    return tuple(continue_branch(SymbolSpec(s), P, REGRESSION_LAMBDAS, N=N))


@functools.lru_cache(maxsize=None)
def highest_wave(s, P=TWO_PI):
    return solve_highest_wave(SymbolSpec(s), P)


@functools.lru_cache(maxsize=None)
def solitary_wave(s, lam=0.5):
    return construct_solitary(SymbolSpec(s), lam)


@pytest.fixture(scope="session")
def branch():
    return regression_branch


@pytest.fixture(scope="session")
def highest():
    return highest_wave


@pytest.fixture(scope="session")
def solitary():
    return solitary_wave


# acceptance lines are collected here and echoed in the terminal summary
ACCEPTANCE_LINES: dict[tuple[int, str], str] = {}


@pytest.fixture
def acceptance_record():
    def record(number, name, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {number:2d} {name}: {detail}"
        ACCEPTANCE_LINES[(number, name)] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
