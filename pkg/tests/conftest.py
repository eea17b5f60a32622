import math

import pytest

from impact_harvest import recipes
from impact_harvest.model import SystemParams, gbar_from
from impact_harvest.sweep import cold_start

# lines collected by the acceptance module, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


GBAR_30 = gbar_from(recipes.M, math.pi / 6, recipes.F_NORM)


def params30(d: float, phi: float = 0.0) -> SystemParams:
    return SystemParams(r=0.5, d=d, gbar=GBAR_30, phi=phi)


@pytest.fixture(scope="session")
def orbit21_016():
    """Stable 2:1 orbit, beta = pi/6, d = 0.16."""
    return cold_start("2:1", params30(0.16))


@pytest.fixture(scope="session")
def orbit21_0204():
    return cold_start("2:1", params30(0.204))


@pytest.fixture(scope="session")
def orbit11_0252():
    """Stable 1:1 orbit, beta = pi/6, d = 0.252."""
    return cold_start("1:1", params30(0.252))


@pytest.fixture(scope="session")
def branches():
    """2:1 branch summaries for the four inclines, keyed "90", "60", "45", "30"."""
    return {k: recipes.compute_branch(k) for k in recipes.BETAS}
