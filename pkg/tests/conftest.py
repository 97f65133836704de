import numpy as np
import pytest

from n2nseismic.synthgen import make_wedge


@pytest.fixture(scope="session")
def wedge():
    return make_wedge()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
