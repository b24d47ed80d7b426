import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ldcontrol.bvfun import PiecewiseConstFn
from ldcontrol.systems import gallery

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def step(x0, left, right=None, a=0.0, b=1.0):
    """Piecewise constant step ``left`` on ``(a, x0)``, ``right`` (default 0) after."""
    left = np.asarray(left, dtype=float)
    right = np.zeros_like(left) if right is None else np.asarray(right, dtype=float)
    return PiecewiseConstFn(a, b, [x0], np.array([left, right]))


def random_pcf(rng, n, jumps, amp, a=0.0, b=1.0):
    br = np.sort(rng.uniform(a, b, jumps))
    return PiecewiseConstFn.from_cells(a, b, br, rng.uniform(-amp, amp, (jumps + 1, n)))


@pytest.fixture(scope="session")
def systems():
    return {name: gallery(name) for name in
            ("linear2", "linear3_mult2", "triangular_ld", "chaplygin", "chaplygin_tracers2")}


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
