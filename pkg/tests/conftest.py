import sys

import numpy as np
import pytest

from balanced_flow import FlowConfig, integrate, make_reference


@pytest.fixture(scope="session")
def ref40():
    return make_reference(40)


@pytest.fixture(scope="session")
def ref60():
    return make_reference(60)


@pytest.fixture(scope="session")
def run03():
    """The beta=0.3, s=0.95, N=40, M=20 fixture run (converges around t=250)."""
    return integrate(FlowConfig(beta=0.3))


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)



def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
