import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cmcfoliate import GridDomain, cone_support, solve_entire, wedge_support

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def window():
    return GridDomain(2, 2.0, 0.05)


@pytest.fixture(scope="session")
def cone_H1(window):
    """Entire CMC-1 graph of the future cone of the origin."""
    return solve_entire(cone_support(), 1.0, window)


@pytest.fixture(scope="session")
def cone_half(window):
    return solve_entire(cone_support(), 0.5, window)


@pytest.fixture(scope="session")
def wedge():
    return wedge_support()


def hyperboloid_u(r2, a=1.0):
    return np.sqrt(a * a + r2)


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split()[0]), k)):
        terminalreporter.write_line(ACCEPTANCE[key])
