import numpy as np
import pytest

from stochfrac.forward import SourceSpec, SpatialMesh1D
from stochfrac.fracops import TimeGrid


@pytest.fixture(scope="session")
def grid1000():
    return TimeGrid(1.0, 1000)


@pytest.fixture(scope="session")
def mesh199():
    return SpatialMesh1D(199)


def zero(t):
    return np.zeros_like(np.asarray(t, dtype=float))


@pytest.fixture
def spec_sin():
    """alpha = 0.8, f = sin(pi x), both time profiles zero."""
    return SourceSpec(0.8, g1=zero, g2=zero)


def pytest_terminal_summary(terminalreporter):
    # acceptance lines collected by tests/test_acceptance.py
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in RESULTS:
        terminalreporter.write_line(line)
