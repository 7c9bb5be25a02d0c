import math

import pytest
from hypothesis import settings

from irsense.channel import SystemConfig

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

# acceptance tests append (number, passed, detail); printed after the run
ACCEPTANCE_LINES = []


@pytest.fixture
def cfg():
    """Simulation defaults: K=8 (L=4, Kb=2), M=N=32, P0=15 dBm, sigma2=-90 dBm."""
    return SystemConfig()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_LINES, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


DEG60 = math.radians(60.0)
