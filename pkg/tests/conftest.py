import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from podstab.model import HeatModelSpec, build_model, spectral_split

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIXTURE = HeatModelSpec(length=math.pi, potential_a=15.0, truncation_n=64, actuators=((0.3, 0.8),))
T_STEP = 0.1


@pytest.fixture(scope="session")
def heat_model():
    return build_model(FIXTURE)


@pytest.fixture(scope="session")
def heat_split(heat_model):
    return spectral_split(heat_model)


@pytest.fixture(scope="session")
def ones(heat_model):
    return np.ones(heat_model.n)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


# one summary line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} ({detail})")
