import math
import time

import numpy as np
import pytest

from ballbot_lpvmpc.model import PAPER_2024
from ballbot_lpvmpc.scenarios import default_scenario, mpc_config_for, run_planes

_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record a one-line acceptance verdict printed in the terminal summary."""
    def _report(number, passed, detail):
        _ACCEPTANCE_LINES.append(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def params():
    return PAPER_2024


def _run(name):
    spec = default_scenario(name)
    config = mpc_config_for(spec)
    t0 = time.perf_counter()
    trajectories = run_planes(spec, config, concurrent=False)
    return spec, config, trajectories, time.perf_counter() - t0


@pytest.fixture(scope="session")
def scenario_runs():
    """Closed-loop runs of the three default scenarios, computed once."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = _run(name)
        return cache[name]
    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


TWO_PI = 2 * math.pi
