import numpy as np
import pytest

from avianjump.model import GeneralizedState, RobotParams, default_state
from avianjump.sim import Scenario, run_takeoff


def random_states(n, seed=0, spread=0.4, rate=3.0):
    """States scattered around the crouched posture with random rates."""
    rng = np.random.default_rng(seed)
    base = default_state().q
    out = []
    for _ in range(n):
        q = base + spread * rng.uniform(-1, 1, 6)
        qd = rate * rng.uniform(-1, 1, 6)
        out.append(GeneralizedState(q, qd))
    return out


def fd_jacobian(f, x, h=1e-6):
    """Central finite differences of a vector function."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


@pytest.fixture(scope="session")
def params():
    return RobotParams()


@pytest.fixture(scope="session")
def default_log():
    return run_takeoff(Scenario())


# -- acceptance report ----------------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
