from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vohedge import ElectricityParams, NigParams, rescale_nig

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

NIG_BASE = NigParams(38.46, -3.85, 6.40, 0.64)
ELEC = ElectricityParams(NigParams(15.81, -1.581, 15.57, 1.56), 0.5747, 3.0, 0.25)
S0 = 100.0
STRIKE = 99.0
T = 0.25


@pytest.fixture
def nig_base() -> NigParams:
    return NIG_BASE


@pytest.fixture
def elec() -> ElectricityParams:
    return ELEC


def nig_scaled(c: float) -> NigParams:
    return rescale_nig(NIG_BASE, c)


def rng(seed: int = 12345) -> np.random.Generator:
    return np.random.default_rng(seed)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
