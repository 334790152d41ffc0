import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from mountpass import ComponentAtlas, Tolerances, bvp_action, double_well, tilted_hat  # noqa: E402

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def dw():
    return double_well()


@pytest.fixture(scope="session")
def hat():
    return tilted_hat(0.1)


@pytest.fixture(scope="session")
def bvp():
    return bvp_action(63)


@pytest.fixture(scope="session")
def tol():
    return Tolerances()


@pytest.fixture(scope="session")
def dw_atlas(dw):
    return ComponentAtlas.build(dw.functional, 0.5, {1: [-1.0, 0.0], 2: [1.0, 0.0]})


@pytest.fixture(scope="session")
def bvp_tol():
    # stiff high modes keep |grad| near 1e-8 under atol 1e-10
    return Tolerances(grad_tol=1e-4, settle_tol=1e-6)


@pytest.fixture(scope="session")
def bvp_atlas(bvp):
    return ComponentAtlas.build(
        bvp.functional, bvp.recommended_c, {1: np.zeros(63)}, escape_level=bvp.escape_level
    )
