import sys
import time

import pytest
from hypothesis import settings

from liouville.langevin import simulate_position_langevin, simulate_velocity_langevin
from liouville.models import PositionModel, VelocityModel

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

EQUIVALENCE_TIMES = (0.2, 1.0, 5.0)


@pytest.fixture(scope="session")
def position_model():
    return PositionModel(u_p=5.0, D=2.5)


@pytest.fixture(scope="session")
def velocity_model():
    return VelocityModel(tau_p=10.0, D=0.02, v0=1.0)


def _timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


@pytest.fixture(scope="session")
def position_ensemble(position_model):
    """n = 1e5 Euler-Maruyama paths with dt = 1e-3, recorded up to t = 5 (with wall time)."""
    return _timed(simulate_position_langevin, position_model, 100_000, 1e-3, 5.0, seed=11,
                  record_times=(0.2, 0.8, 1.0, 5.0))


@pytest.fixture(scope="session")
def velocity_ensemble(velocity_model):
    return _timed(simulate_velocity_langevin, velocity_model, 100_000, 1e-3, 5.0, seed=12,
                  record_times=EQUIVALENCE_TIMES)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
