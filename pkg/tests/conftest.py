import pytest

from optdiv.boundary import TimeGrid, solve_boundary
from optdiv.problem import default_problem
from optdiv.value import StoppingValue

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def problem():
    return default_problem()


@pytest.fixture(scope="session")
def boundary(problem):
    return solve_boundary(problem, TimeGrid.geometric(problem.T, 256))


@pytest.fixture(scope="session")
def boundary64(problem):
    return solve_boundary(problem, TimeGrid.geometric(problem.T, 64))


@pytest.fixture(scope="session")
def stopping_value(problem, boundary):
    return StoppingValue(problem, boundary)


@pytest.fixture(scope="session")
def acceptance_record():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
