import numpy as np
import pytest

from nsaclab.potential import compute_profile


@pytest.fixture(scope="session")
def profile():
    return compute_profile()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
