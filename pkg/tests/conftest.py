import numpy as np
import pytest

from mblab.family import ExpFamily

CHAIN = [[0.9, 0.1], [0.2, 0.8]]
RANK_ONE = [[0.5, 0.5], [0.5, 0.5]]
F01 = [0.0, 1.0]
# valid generator with a structural zero at (1, 2)
SPARSE = [[0.4, 0.3, 0.3], [0.5, 0.5, 0.0], [0.3, 0.3, 0.4]]
SPARSE_F = [1.0, 0.0, 0.5]

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def chain():
    return ExpFamily(CHAIN, F01)


@pytest.fixture(scope="session")
def rank_one():
    return ExpFamily(RANK_ONE, F01)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
