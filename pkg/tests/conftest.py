import sys

import numpy as np
import pytest

from qclimit.scenarios import BandModel, qubit_scenario


@pytest.fixture(scope="session")
def flat_model():
    return BandModel()


@pytest.fixture(scope="session")
def qubit_run(flat_model):
    return qubit_scenario(flat_model)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
