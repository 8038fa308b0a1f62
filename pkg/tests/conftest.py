import numpy as np
import pytest

import chronoq as cq


@pytest.fixture(scope="session")
def grid64():
    return cq.make_grid(0.0, 16, 64, 1.0)


@pytest.fixture(scope="session")
def grid128():
    return cq.make_grid(0.0, 16, 128, 1.0)


@pytest.fixture(scope="session")
def scan():
    return cq.make_scan()


@pytest.fixture(scope="session")
def povm64(grid64, scan):
    return cq.build_povm(grid64, scan)


def noiseless_counts(q, scale=1e12):
    """Counts equal to the expected values, rounded: the infinite-budget limit."""
    c = np.rint(q.values * scale).astype(np.int64)
    return cq.CountMap(q.ps_grid, c, np.zeros(q.ps_grid.shape), scale, 0)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
