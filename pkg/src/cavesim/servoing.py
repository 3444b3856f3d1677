"""Visual-servoing state machine: waypoint choice, heading angle,
lost-line recovery, and the mapping from heading to thrust setpoints.

The camera tick drives this module: each new segmentation map produces
one (ControlSetpoints, ServoState) pair which the faster control loop
holds until the next frame.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .control import ControlSetpoints
from .geometry import wrap_angle
from .perception import SegmentationMap, extract_contours

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
ABORT_EPS = 1e-9


class ServoMode(enum.Enum):
    TRACKING = "TRACKING"
    LOST = "LOST"
    ABORTED = "ABORTED"


@dataclass(frozen=True)
class ServoState:
    mode: ServoMode = ServoMode.TRACKING
    recovery_rotation_accum: float = 0.0  # radians, in [0, 2*pi]


@dataclass(frozen=True)
class HeadingCommand:
    psi: float  # radians in (-pi, pi]
    surge_setpoint: float  # [0, 1]


@dataclass(frozen=True)
class ServoConfig:
    center_u: float
    center_v: float
    target_depth: float
    cruise_speed: float = 0.5
    psi_slow: float = math.radians(60.0)
    recovery_yaw_rate: float = math.radians(30.0)
    min_contour_area: int = 5


def select_waypoint(contours: list, center) -> tuple:
    """Centroid of the contour to chase.

    Single contour: its centroid. Multiple: keep contours ahead of the
    image center (centroid u > center u) when any exist, then take the
    one whose centroid lies farthest from center (squared pixel
    distance); ties break to the earliest contour in input order.
    """
    if not contours:
        raise ValueError("select_waypoint requires at least one contour")
    if len(contours) == 1:
        return contours[0].centroid
    cu, cv = float(center[0]), float(center[1])
    ahead = [c for c in contours if c.centroid_u > cu]
    pool = ahead if ahead else list(contours)
    best, best_d2 = None, -1.0
    for c in pool:
        d2 = (c.centroid_u - cu) ** 2 + (c.centroid_v - cv) ** 2
        if d2 > best_d2:
            best, best_d2 = c, d2
    return best.centroid


def compute_heading(center, waypoint) -> float:
    """Heading angle psi to the waypoint, radians in (-pi, pi].

    Zero means straight ahead (waypoint forward of center along +u),
    positive means turn starboard. A waypoint exactly on the center is
    degenerate; hold course (psi = 0).
    """
    du = float(waypoint[0]) - float(center[0])
    dv = float(waypoint[1]) - float(center[1])
    if du == 0.0 and dv == 0.0:
        log.warning("waypoint coincides with image center; holding course")
        return 0.0
    return float(wrap_angle(math.atan2(dv, du)))


def servo_step(segmap: SegmentationMap, state: ServoState, config: ServoConfig,
               dt: float):
    """One servo tick. Returns (ControlSetpoints, ServoState).

    Pure function of its inputs; dt is the time since the last tick.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if state.mode is ServoMode.ABORTED:
        # terminal: kill thrust, release the depth hold (the positive
        # trim carries the vehicle up)
        return ControlSetpoints(0.0, 0.0, 0.0, 0.0), state

    contours = extract_contours(segmap, config.min_contour_area)
    if not contours:
        accum = min(TWO_PI, state.recovery_rotation_accum
                    + config.recovery_yaw_rate * dt)
        if accum >= TWO_PI - ABORT_EPS:
            return (ControlSetpoints(0.0, 0.0, 0.0, 0.0),
                    ServoState(ServoMode.ABORTED, TWO_PI))
        sp = ControlSetpoints(
            heading_error=0.0,
            target_depth=config.target_depth,
            surge_setpoint=0.0,
            recovery_yaw_rate=config.recovery_yaw_rate,
        )
        return sp, ServoState(ServoMode.LOST, accum)

    center = (config.center_u, config.center_v)
    psi = compute_heading(center, select_waypoint(contours, center))
    sp = ControlSetpoints(
        heading_error=psi,
        target_depth=config.target_depth,
        surge_setpoint=config.cruise_speed,
    )
    return sp, ServoState(ServoMode.TRACKING, 0.0)


def map_to_thrust(cmd: HeadingCommand, heading_pid_out: float,
                  depth_pid_out: float, psi_slow: float = math.radians(60.0)):
    """Channel setpoints (surge, heave, roll, yaw) for the mixer.

    Surge is scaled by max(0, 1 - |psi|/psi_slow) so sharp turns slow
    the vehicle to a pivot; roll is left to passive stability.
    """
    if not (math.isfinite(heading_pid_out) and math.isfinite(depth_pid_out)):
        raise ValueError("PID outputs must be finite")
    slow = max(0.0, 1.0 - abs(cmd.psi) / psi_slow)
    return np.array([
        cmd.surge_setpoint * slow,
        min(1.0, max(-1.0, depth_pid_out)),
        0.0,
        min(1.0, max(-1.0, heading_pid_out)),
    ])
