import numpy as np
import pytest
from hypothesis import settings

from ptring import DeviceGeometry, SystemParams
from ptring.cli import nm_to_angular

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

GHZ = 1e9
PS = 1e-12


@pytest.fixture
def device():
    """Device rates in a frame rotating at the main resonance."""
    return SystemParams.device(0.0)


@pytest.fixture
def carrier():
    return nm_to_angular(1536.9)


@pytest.fixture
def device_optical(carrier):
    return SystemParams.device(carrier)


@pytest.fixture
def geom():
    return DeviceGeometry.from_wavelengths(1536.9, 0.78)


@pytest.fixture
def band():
    def make(points=20001):
        return np.linspace(nm_to_angular(1540.0), nm_to_angular(1534.0), points)
    return make


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
