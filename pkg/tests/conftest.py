import math
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from corrsched.config import ExperimentConfig
from corrsched.rollout import run_rollout
from corrsched.scheduling import Schedule, calibrate_thresholds

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def cfg():
    return ExperimentConfig()


def calibrated(setup, n=16, start=10_000):
    """Full-budget surface from ``n`` terminal rollouts."""
    horizon = setup.params.horizon
    traces = [run_rollout(setup.spec, setup.params, Schedule.terminal(horizon), start + i, False).proposal_defects
              for i in range(n)]
    return calibrate_thresholds(traces, horizon, horizon)


def rz(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, when that module ran."""
    mod = sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines.items()):
        terminalreporter.write_line(line)
