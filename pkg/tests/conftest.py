import numpy as np
import pytest

from bfia.constellation import make_constellation


@pytest.fixture
def bpsk():
    return make_constellation("psk", 2)


@pytest.fixture
def qpsk():
    return make_constellation("psk", 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE, key=str):
        terminalreporter.write_line(ACCEPTANCE[n])
