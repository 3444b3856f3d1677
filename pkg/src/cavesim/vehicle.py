"""Vehicle model: rigid-body state, thruster mixing, dynamics, sensors.

Thruster layout (viewed from above, x forward / y starboard / z down):

    t1  port horizontal      t2  starboard horizontal
    t4  port vertical        t3  starboard vertical

The mixing matrix maps normalized thruster commands to the wrench
channels [surge force, heave force, roll torque, yaw channel]. The yaw
channel is defined positive for a PORT turn (t2 pushing harder than
t1), so the body torque about z-down is the NEGATIVE of that channel.
This matches the heading controller, which outputs a negative value to
turn toward starboard.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import accel
from .geometry import EulerAngles, wrap_angle
from .world import CurrentField

log = logging.getLogger(__name__)

GRAVITY = 9.80665
DEPTH_QUANTUM = 0.002        # depth sensor resolution, meters
SONAR_RELATIVE_QUANTUM = 0.005  # sonar resolution, fraction of range
SONAR_MAX_RANGE = 100.0
SONAR_TILT_LIMIT = math.radians(60.0)

# rows: surge Fx, heave Fz, roll Tx, yaw channel; columns: t1..t4
DEFAULT_MIXING = np.array(
    [
        [1.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 1.0],
        [0.0, 0.0, 0.11, -0.11],
        [-0.15, 0.15, 0.0, 0.0],
    ]
)


class SimulationFault(RuntimeError):
    """Raised when the integrator produces a non-finite state."""


@dataclass
class VehicleParams:
    mass: float = 8.8
    # trimmed 1% positively buoyant: an unpowered vehicle drifts up, and
    # the depth controller carries a steady-state offset of ~2 cm
    buoyancy_force: float = 1.01 * 8.8 * GRAVITY
    center_of_buoyancy_offset: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.0, -0.02])
    )
    linear_drag_coeffs: np.ndarray = field(
        default_factory=lambda: np.array([140.0, 260.0, 220.0])
    )
    # yaw drag is dominated by the flat hull planing sideways; it caps
    # the saturated spin rate near 0.5 rad/s, which keeps the 5 Hz
    # vision loop in a tunable regime
    angular_drag_coeffs: np.ndarray = field(
        default_factory=lambda: np.array([0.6, 3.0, 40.0])
    )
    inertia: np.ndarray = field(default_factory=lambda: np.array([0.06, 0.32, 0.35]))
    max_thrust: float = 35.0
    mixing: np.ndarray = field(default_factory=lambda: DEFAULT_MIXING.copy())
    camera_to_sonar_offset: np.ndarray = field(
        default_factory=lambda: np.array([-0.08, 0.0, 0.04])
    )
    enable_roll_control: bool = True

    def __post_init__(self):
        self.center_of_buoyancy_offset = np.asarray(
            self.center_of_buoyancy_offset, dtype=float).reshape(3)
        self.linear_drag_coeffs = np.asarray(self.linear_drag_coeffs, dtype=float).reshape(3)
        self.angular_drag_coeffs = np.asarray(self.angular_drag_coeffs, dtype=float).reshape(3)
        self.inertia = np.asarray(self.inertia, dtype=float).reshape(3)
        self.mixing = np.asarray(self.mixing, dtype=float).reshape(4, 4)
        self.camera_to_sonar_offset = np.asarray(
            self.camera_to_sonar_offset, dtype=float).reshape(3)
        if self.mass <= 0.0:
            raise ValueError("mass must be positive")
        if self.buoyancy_force < 0.0:
            raise ValueError("buoyancy_force must be >= 0")
        if np.any(self.linear_drag_coeffs < 0.0) or np.any(self.angular_drag_coeffs < 0.0):
            raise ValueError("drag coefficients must be >= 0")
        if np.any(self.inertia <= 0.0):
            raise ValueError("inertia must be positive")
        if self.max_thrust <= 0.0:
            raise ValueError("max_thrust must be positive")
        if abs(np.linalg.det(self.mixing)) < 1e-9:
            raise ValueError("mixing matrix must be invertible")
        self._mixing_inv = np.linalg.inv(self.mixing)
        kp = np.empty(14)
        kp[0] = self.mass
        kp[1] = self.buoyancy_force
        kp[2:5] = self.center_of_buoyancy_offset
        kp[5:8] = self.linear_drag_coeffs
        kp[8:11] = self.angular_drag_coeffs
        kp[11:14] = self.inertia
        self._kernel_params = kp

    def kernel_params(self) -> np.ndarray:
        # cached; treated as read-only by the integrator
        return self._kernel_params


@dataclass
class VehicleState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    attitude: EulerAngles = field(default_factory=lambda: EulerAngles(0.0, 0.0, 0.0))
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))  # world
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))  # body
    time: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.linear_velocity = np.asarray(self.linear_velocity, dtype=float).reshape(3)
        self.angular_velocity = np.asarray(self.angular_velocity, dtype=float).reshape(3)

    @property
    def depth(self) -> float:
        return float(self.position[2])

    def as_vector(self) -> np.ndarray:
        out = np.empty(13)
        out[0:3] = self.position
        out[3] = self.attitude.roll
        out[4] = self.attitude.pitch
        out[5] = self.attitude.yaw
        out[6:9] = self.linear_velocity
        out[9:12] = self.angular_velocity
        out[12] = self.time
        return out

    @classmethod
    def from_vector(cls, s: np.ndarray) -> "VehicleState":
        return cls(
            position=s[0:3].copy(),
            attitude=EulerAngles(float(s[3]), float(s[4]), float(s[5])),
            linear_velocity=s[6:9].copy(),
            angular_velocity=s[9:12].copy(),
            time=float(s[12]),
        )


@dataclass(frozen=True)
class ImuReading:
    attitude: EulerAngles
    timestamp: float


@dataclass(frozen=True)
class DepthReading:
    depth: float
    timestamp: float


@dataclass(frozen=True)
class SonarReading:
    range: float  # meters along the camera boresight
    timestamp: float


def mix_commands(surge: float, heave: float, roll: float, yaw: float,
                 params: VehicleParams) -> np.ndarray:
    """Normalized thruster commands (t1..t4) for channel setpoints.

    Inputs are nominally in [-1, 1]. Outputs are clamped to [-1, 1]
    after inverting the mixing matrix, so saturated requests trade off
    axes exactly as the hardware would.
    """
    if not params.enable_roll_control:
        roll = 0.0
    sp = np.array([surge, heave, roll, yaw], dtype=float)
    cmd = params._mixing_inv @ sp
    clipped = np.clip(cmd, -1.0, 1.0)
    if log.isEnabledFor(logging.DEBUG) and np.any(clipped != cmd):
        log.debug("thruster saturation: %s -> %s", cmd, clipped)
    return clipped


def thruster_wrench(cmd, params: VehicleParams) -> np.ndarray:
    c = np.clip(np.asarray(cmd, dtype=float).reshape(4), -1.0, 1.0)
    return params.mixing @ (params.max_thrust * c)


def step_dynamics(state: VehicleState, cmd, params: VehicleParams,
                  env: CurrentField, dt: float) -> VehicleState:
    """Advance the rigid body one semi-implicit Euler step."""
    if not (0.0 < dt <= 0.1):
        raise ValueError("dt must lie in (0, 0.1]")
    wrench = thruster_wrench(cmd, params)
    cur = env.sample_current(state.time)
    # trig is evaluated here, not in the kernel, so both accel backends
    # see identical values (compiled libm can differ from ours by an ulp)
    att = state.attitude
    trig = np.array([math.cos(att.roll), math.sin(att.roll),
                     math.cos(att.pitch), math.sin(att.pitch),
                     math.cos(att.yaw), math.sin(att.yaw)])
    out = np.empty(13)
    accel.step_body(state.as_vector(), wrench, params.kernel_params(), trig,
                    cur, dt, out)
    if not np.all(np.isfinite(out)):
        raise SimulationFault(f"non-finite state at t={state.time:.3f}")
    return VehicleState.from_vector(out)


def read_imu(state: VehicleState, sigma_rad: float,
             rng: np.random.Generator) -> ImuReading:
    """Attitude estimate with independent Gaussian noise per angle."""
    if sigma_rad < 0.0:
        raise ValueError("sigma_rad must be >= 0")
    if sigma_rad > 0.0:
        n = rng.normal(0.0, sigma_rad, size=3)
    else:
        n = np.zeros(3)
    att = EulerAngles(
        float(wrap_angle(state.attitude.roll + n[0])),
        float(wrap_angle(state.attitude.pitch + n[1])),
        float(wrap_angle(state.attitude.yaw + n[2])),
    )
    return ImuReading(attitude=att, timestamp=state.time)


def read_depth(state: VehicleState, rng: np.random.Generator,
               sigma: float = DEPTH_QUANTUM) -> DepthReading:
    """Pressure depth: Gaussian noise then the sensor's 2 mm lattice."""
    z = state.depth
    if sigma > 0.0:
        z += rng.normal(0.0, sigma)
    z = round(z / DEPTH_QUANTUM) * DEPTH_QUANTUM
    return DepthReading(depth=max(0.0, z), timestamp=state.time)


def read_sonar(state: VehicleState, floor_depth: float, rng: np.random.Generator,
               sigma: float = 0.0):
    """Slant range along body-down to the flat floor, or None (no return).

    No return when the boresight is tilted 60 degrees or more off
    vertical, when the vehicle sits at or below the floor, or past max
    range. Readings quantize to 0.5% of the true range.
    """
    roll, pitch = state.attitude.roll, state.attitude.pitch
    if abs(roll) >= SONAR_TILT_LIMIT or abs(pitch) >= SONAR_TILT_LIMIT:
        return None
    height = floor_depth - state.depth
    if height <= 0.0:
        return None
    r = height / (math.cos(pitch) * math.cos(roll))
    if r > SONAR_MAX_RANGE:
        return None
    quantum = SONAR_RELATIVE_QUANTUM * r
    noisy = r + (rng.normal(0.0, sigma) if sigma > 0.0 else 0.0)
    reading = round(noisy / quantum) * quantum
    if reading <= 0.0:
        return None
    return SonarReading(range=reading, timestamp=state.time)
