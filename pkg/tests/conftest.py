import sys

import numpy as np
import pytest
from hypothesis import settings

from levitated2d.model import TWO_PI, SystemParams
from levitated2d.presets import table1
from levitated2d.steady_state import check_stability, build_drift

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# printed two-decimal mechanical covariance for the main data set
PRINTED_VM = np.array([
    [2.13, 0.00, -0.32, -0.59],
    [0.00, 2.07, 0.52, -0.34],
    [-0.32, 0.52, 2.47, 0.00],
    [-0.59, -0.34, 0.00, 2.48],
])


@pytest.fixture
def params():
    return table1()


@pytest.fixture
def printed_vm():
    return PRINTED_VM.copy()


def random_stable_params(rng, max_tries=200):
    """Random red-detuned configuration with a stable drift matrix."""
    for _ in range(max_tries):
        kappa = TWO_PI * rng.uniform(20e3, 400e3)
        p = SystemParams(
            omega_x=TWO_PI * rng.uniform(60e3, 250e3),
            omega_y=TWO_PI * rng.uniform(60e3, 250e3),
            g_x=TWO_PI * rng.uniform(0.0, 25e3),
            g_y=TWO_PI * rng.uniform(0.0, 25e3),
            Gamma_x=TWO_PI * rng.uniform(10.0, 2e4),
            Gamma_y=TWO_PI * rng.uniform(10.0, 2e4),
            kappa=kappa,
            detuning=-TWO_PI * rng.uniform(30e3, 300e3),
            eta=rng.uniform(0.05, 1.0),
            gamma_x=10 ** rng.uniform(-4, 3),
            gamma_y=10 ** rng.uniform(-4, 3),
        )
        if check_stability(build_drift(p)).abscissa < -1.0:
            return p
    raise RuntimeError("no stable draw found")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
