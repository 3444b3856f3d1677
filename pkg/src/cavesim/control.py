"""PID regulators for heading and depth.

Controllers are pure functions: state goes in, a new state comes out.
That keeps trials replayable and makes gain searches trivially
parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# anti-windup bound on the integral term's contribution to the output
I_MAX = 0.5


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float = 0.0
    kd: float = 0.0

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.ki < 0.0:
            raise ValueError("ki must be >= 0")

    def scaled(self, factor: float) -> "PidGains":
        """Uniformly rescaled gains (unit normalization of a channel)."""
        return PidGains(self.kp * factor, self.ki * factor, self.kd * factor)


@dataclass(frozen=True)
class PidState:
    prev_error: float = 0.0
    integral: float = 0.0
    initialized: bool = False


@dataclass(frozen=True)
class ControlSetpoints:
    """Output of one visual-servoing tick, held until the next frame.

    heading_error is the angle psi to null (radians, positive toward
    starboard); surge_setpoint is the normalized forward command in
    [0, 1]. During line-loss recovery both are zero and
    recovery_yaw_rate carries the commanded spin rate instead.
    """

    heading_error: float
    target_depth: float
    surge_setpoint: float
    recovery_yaw_rate: float = 0.0


def pid_update(gains: PidGains, pid: PidState, error: float, dt: float):
    """One PID step. Returns (output, next_state).

    The derivative term is zero on the first call. The integral
    accumulator is clamped so its contribution never exceeds I_MAX.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if not math.isfinite(error):
        raise ValueError("error must be finite")
    integral = pid.integral + error * dt
    bound = I_MAX / gains.ki if gains.ki > 0.0 else I_MAX
    integral = min(bound, max(-bound, integral))
    derivative = (error - pid.prev_error) / dt if pid.initialized else 0.0
    out = gains.kp * error + gains.ki * integral + gains.kd * derivative
    return out, PidState(prev_error=error, integral=integral, initialized=True)


def heading_controller(psi: float, gains: PidGains, pid: PidState, dt: float):
    """Yaw-channel command in [-1, 1] that drives psi toward zero.

    The loop error is -psi: a line seen toward starboard (psi > 0)
    must produce a starboard turn, which the thruster mixing defines
    as a negative yaw-channel value.
    """
    out, pid = pid_update(gains, pid, -psi, dt)
    return min(1.0, max(-1.0, out)), pid


def depth_controller(current_depth: float, target_depth: float, gains: PidGains,
                     pid: PidState, dt: float):
    """Heave-channel command in [-1, 1]; positive thrusts downward.

    Error is target - current: with z positive down, a too-shallow
    vehicle has positive error and gets pushed deeper.
    """
    out, pid = pid_update(gains, pid, target_depth - current_depth, dt)
    return min(1.0, max(-1.0, out)), pid
