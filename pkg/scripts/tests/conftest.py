import math
import os
import sys

import pytest

# Add src to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..', 'src')))

from ipcrlb.modules.clutter import ClutterModel  # noqa: E402
from ipcrlb.modules.geometry import KinematicState  # noqa: E402
from ipcrlb.modules.tmu import SignalModel  # noqa: E402


@pytest.fixture
def atsc():
    return SignalModel.atsc()


@pytest.fixture
def tx():
    return KinematicState(0.0, 0.0)


@pytest.fixture
def rx():
    return KinematicState(3000.0, 0.0)


@pytest.fixture
def target():
    return KinematicState(1500.0, 1000.0, 10.0, 0.0)


@pytest.fixture
def clutter():
    return ClutterModel(density=1.5e-3, V=20000.0 * 400.0 * 2 * math.pi, g=4.0)


@pytest.fixture
def sweep_sites():
    """Receiver at the origin and transmitter 5 km away at bearing pi."""
    return KinematicState(-5000.0, 0.0), KinematicState(0.0, 0.0)
