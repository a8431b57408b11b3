import numpy as np
import pytest

from trendblock.model import DesignArray


def random_design(rng, v, k, b):
    return DesignArray(v, rng.integers(1, v + 1, size=(k, b)))


@pytest.fixture
def rng():
    return np.random.default_rng(20080601)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
