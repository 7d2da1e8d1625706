import numpy as np
import pytest

from bnm import KERNELS

ACCEPTANCE_LINES = []

IDENTITY = np.array([[1.0, 0.0], [0.0, 1.0]])
PERMUTATION = np.array([[0.0, 1.0], [1.0, 0.0]])
REPEATED = np.array([[1.0, 0.0], [1.0, 0.0]])
UNIFORM = np.array([[0.5, 0.5], [0.5, 0.5]])


@pytest.fixture(params=sorted(KERNELS))
def kernel(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
