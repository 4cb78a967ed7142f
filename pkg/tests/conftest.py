import math

import numpy as np
import pytest

from etaslin.catalog import EventCatalog, ObservationWindow
from etaslin.model import EtasParams
from etaslin.simulator import SimConfig, simulate


def random_catalog(n, rng, t_start=0.0, t_end=100.0, m0=3.0, beta=math.log(10)):
    times = np.sort(rng.uniform(t_start, t_end, n))
    mags = m0 + rng.exponential(1.0 / beta, n)
    return EventCatalog(times, mags, ObservationWindow(t_start, t_end, m0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_catalog():
    """Five hand-placed events on [2, 12]."""
    return EventCatalog([2.5, 3.0, 3.05, 7.2, 11.0],
                        [4.1, 3.0, 3.6, 5.2, 3.3],
                        ObservationWindow(2.0, 12.0, 3.0))


@pytest.fixture(scope="session")
def sim_catalog():
    """About 100 simulated events with a visible aftershock structure."""
    params = EtasParams(0.2, 0.6, 1.5, 0.02, 1.3)
    cfg = SimConfig(params, ObservationWindow(0.0, 400.0, 3.0), seed=7)
    return simulate(cfg)


@pytest.fixture(scope="session")
def params():
    return EtasParams(0.3, 0.4, 1.2, 0.05, 1.25)


# one line per acceptance criterion, collected by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
