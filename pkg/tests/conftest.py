import numpy as np
import pytest

from mgtsim import BlockOperator, MgtParams, make_dirichlet_power_operator

DEFAULT_PARAMS = MgtParams(1.0, 2.0, 1.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def params():
    return DEFAULT_PARAMS


def dirichlet_block(n, params=DEFAULT_PARAMS, m=1):
    return BlockOperator(make_dirichlet_power_operator(m, n), params)


@pytest.fixture
def B16():
    return dirichlet_block(16)


@pytest.fixture
def B32():
    return dirichlet_block(32)


# acceptance criteria report one line each in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
