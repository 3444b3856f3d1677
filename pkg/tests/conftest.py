import numpy as np
import pytest

from cavesim import accel
from cavesim.geometry import EulerAngles
from cavesim.perception import CameraConfig
from cavesim.vehicle import VehicleState
from cavesim.world import CavelinePath


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # touch every kernel once so JIT compilation cost lands here, not
    # inside a timed test
    segs = np.array([[10.0, 10.0, 40.0, 40.0, 2.0, 2.0]])
    accel.rasterize_capsules(segs, 64, 64)
    accel.label_components(np.eye(8, dtype=np.uint8))
    out = np.empty(13)
    accel.step_body(np.zeros(13), np.zeros(4),
                    np.array([8.8, 87.0, 0.0, 0.0, -0.02,
                              140.0, 260.0, 220.0, 0.6, 3.0, 40.0,
                              0.06, 0.32, 0.35]),
                    np.array([1.0, 0.0, 1.0, 0.0, 1.0, 0.0]),
                    np.zeros(3), 0.01, out)


@pytest.fixture
def straight_path():
    return CavelinePath([[-5.0, 0.0, 1.0], [5.0, 0.0, 1.0]], line_width=0.01)


@pytest.fixture
def default_intrinsics():
    return CameraConfig().intrinsics()


def make_state(x=0.0, y=0.0, z=0.5, roll=0.0, pitch=0.0, yaw=0.0):
    return VehicleState(position=np.array([x, y, z]),
                        attitude=EulerAngles(roll, pitch, yaw))
