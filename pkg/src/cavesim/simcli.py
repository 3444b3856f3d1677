"""Command-line front end: run trials, sweep gains, export plot data.

Scenario files are YAML with a fixed schema; unknown sections or keys
are rejected rather than ignored, so a typo cannot silently fall back
to a default. Exit codes: 0 trial completed (including an early
surface), 2 configuration error, 3 simulation fault, 4 trial aborted
in recovery.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace

import numpy as np
import yaml

from .evaluation import (DEFAULT_DEPTH_PAIRS, DEFAULT_HEADING_PAIRS,
                         GainsTarget, GridSpec, TrialLog, grid_search,
                         summarize, write_grid_csv)
from .perception import CameraConfig, NoiseModel
from .vehicle import SimulationFault, VehicleParams
from .world import (CavelinePath, CurrentField, Scenario, build_hexagon_loop,
                    build_lawnmower, build_rectangle_loop)


class ConfigError(ValueError):
    """Bad scenario file or command-line arguments."""


_PATH_KEYS = {"kind", "width_m", "height_m", "circumradius_m", "rows",
              "row_length_m", "row_spacing_m", "depth_m", "line_width_m",
              "vertices", "closed"}
_ENV_KEYS = {"floor_depth", "current", "gust_amplitude", "gust_period"}
_RUN_KEYS = {"duration", "seed", "dt", "camera_period", "eval_period"}
_POSE_KEYS = {"position", "yaw_deg", "pitch_deg", "roll_deg"}
_CONTROL_KEYS = {"target_depth", "heading_gains", "depth_gains",
                 "depth_gain_scale", "cruise_speed"}
_CAMERA_KEYS = {"width", "height", "hfov_deg", "vfov_deg", "aft_occlusion_px"}
_SENSOR_KEYS = {"imu_sigma_deg", "depth_sigma", "sonar_sigma",
                "imu_period", "depth_period", "sonar_period"}
_NOISE_KEYS = {"dropout_prob", "gap_rate", "gap_length_px", "speckle_rate",
               "speckle_area_px"}
_VEHICLE_KEYS = {"mass", "buoyancy_force", "center_of_buoyancy_offset",
                 "linear_drag_coeffs", "angular_drag_coeffs", "inertia",
                 "max_thrust", "camera_to_sonar_offset", "enable_roll_control"}
_SERVO_KEYS = {"psi_slow_deg", "recovery_yaw_rate_deg_s", "min_contour_area"}
_SECTIONS = {"path": _PATH_KEYS, "environment": _ENV_KEYS, "run": _RUN_KEYS,
             "initial_pose": _POSE_KEYS, "control": _CONTROL_KEYS,
             "camera": _CAMERA_KEYS, "sensors": _SENSOR_KEYS,
             "noise": _NOISE_KEYS, "vehicle": _VEHICLE_KEYS,
             "servo": _SERVO_KEYS}


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name)
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    unknown = set(sec) - _SECTIONS[name]
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {sorted(unknown)}")
    return sec


def _build_path(sec: dict) -> CavelinePath:
    kind = sec.get("kind")
    if kind is None:
        raise ConfigError("path.kind is required")
    lw = float(sec.get("line_width_m", 0.01))
    try:
        if kind == "rectangle":
            return build_rectangle_loop(float(sec["width_m"]),
                                        float(sec["height_m"]),
                                        float(sec["depth_m"]), lw)
        if kind == "hexagon":
            return build_hexagon_loop(float(sec["circumradius_m"]),
                                      float(sec["depth_m"]), lw)
        if kind == "lawnmower":
            return build_lawnmower(int(sec["rows"]),
                                   float(sec["row_length_m"]),
                                   float(sec["row_spacing_m"]),
                                   float(sec["depth_m"]), lw)
        if kind == "vertices":
            return CavelinePath(np.asarray(sec["vertices"], dtype=float),
                                closed=bool(sec.get("closed", False)),
                                line_width=lw)
    except KeyError as e:
        raise ConfigError(f"path kind '{kind}' is missing key {e}") from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad path definition: {e}") from e
    raise ConfigError(f"unknown path.kind '{kind}'")


def build_scenario(doc) -> Scenario:
    """Construct a Scenario from a parsed YAML document."""
    if not isinstance(doc, dict):
        raise ConfigError("scenario file must contain a YAML mapping")
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    if "path" not in doc:
        raise ConfigError("section 'path' is required")
    env = _section(doc, "environment")
    ctrl = _section(doc, "control")
    if "floor_depth" not in env:
        raise ConfigError("environment.floor_depth is required")
    if "target_depth" not in ctrl:
        raise ConfigError("control.target_depth is required")

    run = _section(doc, "run")
    pose = _section(doc, "initial_pose")
    sensors = _section(doc, "sensors")
    servo = _section(doc, "servo")

    kwargs = {
        "path": _build_path(_section(doc, "path")),
        "floor_depth": float(env["floor_depth"]),
        "target_depth": float(ctrl["target_depth"]),
        "current": CurrentField(
            velocity=np.asarray(env.get("current", [0.0, 0.0, 0.0]), dtype=float),
            gust_amplitude=np.asarray(env.get("gust_amplitude", [0.0, 0.0, 0.0]),
                                      dtype=float),
            gust_period=float(env.get("gust_period", 10.0)),
        ),
    }
    if "duration" in run:
        kwargs["duration"] = float(run["duration"])
    if "seed" in run:
        kwargs["seed"] = int(run["seed"])
    if "dt" in run:
        kwargs["dt"] = float(run["dt"])
    if "camera_period" in run:
        kwargs["camera_period"] = float(run["camera_period"])
    if "eval_period" in run:
        kwargs["eval_period"] = float(run["eval_period"])
    if "position" in pose:
        kwargs["initial_position"] = np.asarray(pose["position"], dtype=float)
    for key in ("yaw", "pitch", "roll"):
        if f"{key}_deg" in pose:
            kwargs[f"initial_{key}"] = math.radians(float(pose[f"{key}_deg"]))
    for key in ("heading_gains", "depth_gains"):
        if key in ctrl:
            kwargs[key] = tuple(float(g) for g in ctrl[key])
    if "depth_gain_scale" in ctrl:
        kwargs["depth_gain_scale"] = float(ctrl["depth_gain_scale"])
    if "cruise_speed" in ctrl:
        kwargs["cruise_speed"] = float(ctrl["cruise_speed"])
    if "imu_sigma_deg" in sensors:
        kwargs["imu_sigma"] = math.radians(float(sensors["imu_sigma_deg"]))
    for key in ("depth_sigma", "sonar_sigma", "imu_period", "depth_period",
                "sonar_period"):
        if key in sensors:
            kwargs[key] = float(sensors[key])
    if "psi_slow_deg" in servo:
        kwargs["psi_slow_deg"] = float(servo["psi_slow_deg"])
    if "recovery_yaw_rate_deg_s" in servo:
        kwargs["recovery_yaw_rate"] = math.radians(
            float(servo["recovery_yaw_rate_deg_s"]))
    if "min_contour_area" in servo:
        kwargs["min_contour_area"] = int(servo["min_contour_area"])

    try:
        if "camera" in doc:
            kwargs["camera"] = CameraConfig(**_section(doc, "camera"))
        if "noise" in doc:
            kwargs["noise"] = NoiseModel(**_section(doc, "noise"))
        if "vehicle" in doc:
            kwargs["vehicle"] = VehicleParams(**_section(doc, "vehicle"))
        return Scenario(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e


def load_scenario(path) -> Scenario:
    try:
        with open(path) as f:
            doc = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"cannot read scenario file: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML: {e}") from e
    return build_scenario(doc)


def export_plotdata(log: TrialLog, out_prefix: str) -> tuple:
    """Write gnuplot-style series files from a trial log.

    <prefix>_depth.dat holds (t, z) for every row. <prefix>_delta.dat
    holds (t, signed delta) for measured ticks only, with a blank line
    marking each tick without a measurement so plots break the curve
    there. Values are written at full precision and parse back exactly.
    """
    depth_path = f"{out_prefix}_depth.dat"
    delta_path = f"{out_prefix}_delta.dat"
    with open(depth_path, "w", newline="\n") as f:
        f.write("# t z\n")
        for r in log.rows:
            f.write(f"{r.t!r} {r.z!r}\n")
    with open(delta_path, "w", newline="\n") as f:
        f.write("# t delta\n")
        for r in log.rows:
            if r.delta_pipeline is None:
                f.write("\n")
            else:
                f.write(f"{r.t!r} {float(r.delta_pipeline)!r}\n")
    return depth_path, delta_path


def _parse_gains(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) not in (2, 3):
        raise ConfigError(f"gains must be kp,kd or kp,kd,ki: {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as e:
        raise ConfigError(f"bad gains {text!r}: {e}") from e


def _parse_pairs(text: str) -> list:
    pairs = []
    for chunk in text.split(","):
        parts = chunk.split(":")
        if len(parts) != 2:
            raise ConfigError(f"pairs must look like kp:kd,kp:kd: {text!r}")
        try:
            pairs.append((float(parts[0]), float(parts[1])))
        except ValueError as e:
            raise ConfigError(f"bad pair {chunk!r}: {e}") from e
    return pairs


def _parse_values(text: str) -> list:
    try:
        return [float(p) for p in text.split(",")]
    except ValueError as e:
        raise ConfigError(f"bad value list {text!r}: {e}") from e


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.dt is not None:
        updates["dt"] = args.dt
    if args.camera_period is not None:
        updates["camera_period"] = args.camera_period
    if args.gains_heading is not None:
        updates["heading_gains"] = _parse_gains(args.gains_heading)
    if args.gains_depth is not None:
        updates["depth_gains"] = _parse_gains(args.gains_depth)
    if not updates:
        return scenario
    try:
        return replace(scenario, **updates)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _cmd_run(args) -> int:
    from . import simloop

    scenario = _apply_overrides(load_scenario(args.scenario), args)
    result = simloop.run_trial(scenario, out_dir=args.out,
                               dump_frames=args.dump_frames)
    print(f"termination: {result.termination}")
    print(f"log rows: {len(result.log)}")
    warmup = min(10.0, scenario.duration / 2.0)
    try:
        summary = summarize(result.log, warmup)
    except ValueError:
        pass
    else:
        print(f"mean |delta| after {warmup:g}s warmup: "
              f"{summary.delta.mean * 100.0:.2f} cm "
              f"(n={summary.delta.count}, missing={summary.delta_missing})")
        print(f"mean |depth error|: {summary.depth.mean * 100.0:.2f} cm")
    if result.termination == "aborted":
        return 4
    return 0


def _cmd_grid(args) -> int:
    scenario = load_scenario(args.scenario)
    target = GainsTarget(args.target)
    if args.pairs is not None:
        pairs = _parse_pairs(args.pairs)
    elif args.kp_values is not None or args.kd_values is not None:
        if args.kp_values is None or args.kd_values is None:
            raise ConfigError("--kp-values and --kd-values go together")
        pairs = None
    else:
        pairs = (DEFAULT_HEADING_PAIRS if target is GainsTarget.HEADING
                 else DEFAULT_DEPTH_PAIRS)
    try:
        if pairs is not None:
            spec = GridSpec(scenario, repeats=args.repeats, pairs=pairs)
        else:
            spec = GridSpec(scenario, repeats=args.repeats,
                            kp_values=_parse_values(args.kp_values),
                            kd_values=_parse_values(args.kd_values))
    except ValueError as e:
        raise ConfigError(str(e)) from e

    rows = grid_search(spec, target, workers=args.workers, out_dir=args.out)
    print(f"{'kp':>8} {'kd':>8} {'mean_cm':>10} {'std_cm':>10} {'fail':>5}")
    for r in rows:
        print(f"{r.kp:>8g} {r.kd:>8g} {r.mean * 100.0:>10.3f} "
              f"{r.std * 100.0:>10.3f} {r.failures:>5d}")
    if args.out is not None:
        write_grid_csv(rows, f"{args.out}/grid_{target.value}.csv")
    return 0


def _cmd_plotdata(args) -> int:
    try:
        log = TrialLog.from_csv(args.log)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read trial log: {e}") from e
    depth_path, delta_path = export_plotdata(log, args.out_prefix)
    print(f"wrote {depth_path}")
    print(f"wrote {delta_path}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cavesim",
        description="Deterministic caveline-following simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run one scenario trial")
    runp.add_argument("--scenario", required=True, help="scenario YAML file")
    runp.add_argument("--out", default=None,
                      help="directory for trial.csv and manifest.json")
    runp.add_argument("--seed", type=int, default=None)
    runp.add_argument("--dt", type=float, default=None)
    runp.add_argument("--camera-period", type=float, default=None)
    runp.add_argument("--gains-heading", default=None, metavar="KP,KD[,KI]")
    runp.add_argument("--gains-depth", default=None, metavar="KP,KD[,KI]")
    runp.add_argument("--dump-frames", action="store_true",
                      help="write each camera frame as a PGM image")
    runp.set_defaults(func=_cmd_run)

    gridp = sub.add_parser("grid", help="grid-search controller gains")
    gridp.add_argument("--scenario", required=True)
    gridp.add_argument("--target", required=True,
                       choices=[t.value for t in GainsTarget])
    gridp.add_argument("--pairs", default=None, metavar="KP:KD,KP:KD,...")
    gridp.add_argument("--kp-values", default=None, metavar="KP,KP,...")
    gridp.add_argument("--kd-values", default=None, metavar="KD,KD,...")
    gridp.add_argument("--repeats", type=int, default=5)
    gridp.add_argument("--workers", type=int, default=1)
    gridp.add_argument("--out", default=None,
                       help="directory for grid and per-trial CSVs")
    gridp.set_defaults(func=_cmd_grid)

    plotp = sub.add_parser("plotdata", help="export plot series from a log")
    plotp.add_argument("--log", required=True, help="trial CSV file")
    plotp.add_argument("--out-prefix", required=True)
    plotp.set_defaults(func=_cmd_plotdata)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except SimulationFault as e:
        print(f"simulation fault: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
