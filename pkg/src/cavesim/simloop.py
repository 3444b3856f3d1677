"""Closed-loop trial runner.

One trial wires the whole stack together at a fixed base step dt:
sensors and the camera tick on integer multiples of dt, the servo runs
on each camera frame, both PID loops run every step on the held
setpoints, and the rigid body integrates underneath. Everything random
draws from one per-trial generator in a fixed schedule order, so a
seed pins the entire trajectory bit for bit.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__, accel
from .control import PidGains, PidState, depth_controller, heading_controller
from .evaluation import (Calibration, LogRow, TrialLog, tracking_error_oracle,
                         tracking_error_pipeline)
from .geometry import EulerAngles
from .perception import (CameraConfig, NoiseModel, apply_hull_occlusion,
                         corrupt, render_downcam, write_pgm)
from .servoing import (HeadingCommand, ServoConfig, ServoMode, ServoState,
                       map_to_thrust, servo_step)
from .vehicle import (VehicleParams, VehicleState, mix_commands, read_depth,
                      read_imu, read_sonar, step_dynamics)
from .world import Scenario


@dataclass
class TrialResult:
    log: TrialLog
    termination: str  # "duration", "aborted", or "surfaced"
    final_state: VehicleState
    setpoint_events: list = field(default_factory=list)  # (t, ControlSetpoints)
    seed: int = 0


def _every(period: float, dt: float) -> int:
    return max(1, round(period / dt))


def _gains(tup) -> PidGains:
    # scenario tuples are (kp, kd, ki)
    return PidGains(kp=tup[0], ki=tup[2], kd=tup[1])


def run_trial(scenario: Scenario, out_dir=None, dump_frames: bool = False) -> TrialResult:
    """Run one scenario to termination and return its log.

    With out_dir set, also writes trial.csv and manifest.json there
    (and numbered PGM frames under frames/ when dump_frames is on).
    """
    vehicle = scenario.vehicle if scenario.vehicle is not None else VehicleParams()
    camera = scenario.camera if scenario.camera is not None else CameraConfig()
    noise = scenario.noise if scenario.noise is not None else NoiseModel()
    K = camera.intrinsics()

    servo_cfg = ServoConfig(
        center_u=K.cx, center_v=K.cy,
        target_depth=scenario.target_depth,
        cruise_speed=scenario.cruise_speed,
        psi_slow=math.radians(scenario.psi_slow_deg),
        recovery_yaw_rate=scenario.recovery_yaw_rate,
        min_contour_area=scenario.min_contour_area,
    )
    heading_gains = _gains(scenario.heading_gains)
    # the depth channel works in meters against a [-1, 1] actuator, so
    # its gains are normalized once here instead of per call
    depth_gains = _gains(scenario.depth_gains).scaled(scenario.depth_gain_scale)

    dt = scenario.dt
    n_steps = round(scenario.duration / dt)
    every_imu = _every(scenario.imu_period, dt)
    every_depth = _every(scenario.depth_period, dt)
    every_sonar = _every(scenario.sonar_period, dt)
    every_cam = _every(scenario.camera_period, dt)
    every_eval = _every(scenario.eval_period, dt)
    cam_dt = every_cam * dt

    rng = np.random.default_rng(scenario.seed)
    state = VehicleState(
        position=np.asarray(scenario.initial_position, dtype=float).copy(),
        attitude=EulerAngles(scenario.initial_roll, scenario.initial_pitch,
                             scenario.initial_yaw),
    )
    calib = Calibration(K=K,
                        camera_to_sonar_offset=vehicle.camera_to_sonar_offset,
                        initial_attitude=state.attitude)

    servo_state = ServoState()
    pid_heading = PidState()
    pid_depth = PidState()
    setpoints = None
    heading_out = 0.0
    imu = None
    depth_reading = None
    sonar = None
    latest_map = None
    log = TrialLog()
    events = []
    frame_count = 0

    frames_dir = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        if dump_frames:
            frames_dir = os.path.join(str(out_dir), "frames")
            os.makedirs(frames_dir, exist_ok=True)

    # recovery spin: feedforward yaw channel that balances quadratic
    # drag at the commanded recovery rate (negative = starboard turn)
    w = scenario.recovery_yaw_rate
    yaw_ff = -float(vehicle.angular_drag_coeffs[2]) * w * w / vehicle.max_thrust

    termination = "duration"
    for k in range(n_steps):
        t = k * dt

        if k % every_imu == 0:
            imu = read_imu(state, scenario.imu_sigma, rng)
        if k % every_depth == 0:
            depth_reading = read_depth(state, rng, scenario.depth_sigma)
        if k % every_sonar == 0:
            sonar = read_sonar(state, scenario.floor_depth, rng,
                               scenario.sonar_sigma)

        if k % every_cam == 0:
            segmap = render_downcam(state, scenario.path, K)
            segmap = apply_hull_occlusion(segmap, camera.aft_occlusion_px)
            segmap = corrupt(segmap, noise, rng)
            setpoints, servo_state = servo_step(segmap, servo_state,
                                                servo_cfg, cam_dt)
            events.append((t, setpoints))
            latest_map = segmap
            if servo_state.mode is ServoMode.TRACKING:
                # heading control runs at the vision rate: psi only
                # changes once per frame, so the derivative term works
                # on real frame-to-frame motion
                heading_out, pid_heading = heading_controller(
                    setpoints.heading_error, heading_gains, pid_heading,
                    cam_dt)
            else:
                heading_out = 0.0  # PID state held while the line is lost
            if frames_dir is not None:
                write_pgm(segmap.pixels,
                          os.path.join(frames_dir, f"{frame_count:05d}.pgm"))
                frame_count += 1

        if k % every_eval == 0:
            pr = tracking_error_pipeline(latest_map, imu, sonar, calib,
                                         scenario.min_contour_area)
            log.append(LogRow(
                t=t,
                x=float(state.position[0]), y=float(state.position[1]),
                z=float(state.position[2]),
                roll=state.attitude.roll, pitch=state.attitude.pitch,
                yaw=state.attitude.yaw,
                psi=setpoints.heading_error,
                delta_pipeline=pr.signed_delta if pr.valid else None,
                delta_oracle=tracking_error_oracle(state, scenario.path),
                depth_error=state.depth - scenario.target_depth,
                mode=servo_state.mode.value,
            ))

        if servo_state.mode is ServoMode.ABORTED:
            termination = "aborted"
            break

        depth_out, pid_depth = depth_controller(
            depth_reading.depth, setpoints.target_depth, depth_gains,
            pid_depth, dt)

        if servo_state.mode is ServoMode.LOST:
            channels = (0.0, min(1.0, max(-1.0, depth_out)), 0.0, yaw_ff)
        else:
            channels = tuple(map_to_thrust(
                HeadingCommand(setpoints.heading_error,
                               setpoints.surge_setpoint),
                heading_out, depth_out, servo_cfg.psi_slow))

        cmd = mix_commands(*channels, vehicle)
        state = step_dynamics(state, cmd, vehicle, scenario.current, dt)

        if state.depth <= 0.0:
            termination = "surfaced"
            break

    result = TrialResult(log=log, termination=termination, final_state=state,
                         setpoint_events=events, seed=scenario.seed)
    if out_dir is not None:
        log.to_csv(os.path.join(str(out_dir), "trial.csv"))
        _write_manifest(os.path.join(str(out_dir), "manifest.json"),
                        scenario, result, frame_count)
    return result


def _write_manifest(path, scenario: Scenario, result: TrialResult,
                    frame_count: int) -> None:
    manifest = {
        "version": __version__,
        "backend": accel.BACKEND,
        "seed": int(scenario.seed),
        "termination": result.termination,
        "duration_s": scenario.duration,
        "dt": scenario.dt,
        "camera_period": scenario.camera_period,
        "eval_period": scenario.eval_period,
        "target_depth": scenario.target_depth,
        "floor_depth": scenario.floor_depth,
        "heading_gains": list(scenario.heading_gains),
        "depth_gains": list(scenario.depth_gains),
        "cruise_speed": scenario.cruise_speed,
        "path_closed": scenario.path.closed,
        "path_length_m": scenario.path.total_length,
        "sloped_path": scenario.path.sloped,
        "oracle_exact": not scenario.path.sloped,
        "log_rows": len(result.log),
        "frames_dumped": frame_count,
        "final_position": [float(v) for v in result.final_state.position],
    }
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
