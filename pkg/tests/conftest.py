import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from membranepol.geometry import make_circle, make_ellipse
from membranepol.media import MembraneModel

settings.register_profile("ci", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

# cell radius whose disk has unit area (a rescaled single cell)
UNIT_RADIUS = 1.0 / np.sqrt(np.pi)


@pytest.fixture
def typical():
    return MembraneModel.typical()


@pytest.fixture
def normalized():
    """sigma0 = 1, eps0 = 0 model used by the small-thickness formulas."""
    return MembraneModel(sigma0=1.0, eps0=0.0, sigma_m=1.0, eps_m=1.0, delta=1e-4)


@pytest.fixture
def circle():
    return make_circle(0.3, 128)


@pytest.fixture
def ellipse():
    return make_ellipse(2.0, 1.0, n=128)


# acceptance verdicts, one line per criterion, echoed in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
