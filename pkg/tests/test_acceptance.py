"""Shipping acceptance suite.

One test per release criterion, each printing a [PASS] line with the
measured numbers once its assertions hold. The calm-water rectangle
trial is shared by the depth-hold, loop-completion, and determinism
checks so the 120 s scenario only runs where needed.
"""

import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from cavesim.control import PidGains, PidState, pid_update
from cavesim.evaluation import (DEFAULT_HEADING_PAIRS, Calibration,
                                GainsTarget, GridSpec, factor_of_safety,
                                grid_search, tracking_error_oracle,
                                tracking_error_pipeline)
from cavesim.geometry import EulerAngles, euler_to_rotation
from cavesim.perception import (CameraConfig, SegmentationMap,
                                extract_contours, render_downcam)
from cavesim.servoing import (TWO_PI, ServoConfig, ServoMode, ServoState,
                              select_waypoint, servo_step)
from cavesim.simcli import load_scenario
from cavesim.simcli import main as cli_main
from cavesim.simloop import run_trial
from cavesim.vehicle import (GRAVITY, ImuReading, SonarReading, VehicleParams,
                             VehicleState, mix_commands, read_sonar,
                             step_dynamics)
from cavesim.world import CavelinePath, CurrentField, arclength_projection

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
CENTER = (240.0, 192.0)


@pytest.fixture(scope="module")
def calm_trial(tmp_path_factory):
    scenario = load_scenario(SCENARIOS / "rectangle_calm.yaml")
    out = tmp_path_factory.mktemp("calm")
    t0 = time.perf_counter()
    result = run_trial(scenario, out_dir=str(out))
    elapsed = time.perf_counter() - t0
    return scenario, result, elapsed, (out / "trial.csv").read_bytes()


def _blob(mask, v, u):
    mask[v - 1:v + 2, u - 1:u + 2] = 1


def test_c01_waypoint_selection_suite():
    t0 = time.perf_counter()
    cfg = ServoConfig(center_u=CENTER[0], center_v=CENTER[1],
                      target_depth=0.35, cruise_speed=0.4)

    # empty map drops the servo into LOST
    blank = SegmentationMap(pixels=np.zeros((384, 480), dtype=np.uint8))
    _, st = servo_step(blank, ServoState(), cfg, 0.2)
    assert st.mode is ServoMode.LOST

    # a single contour is chased unconditionally, even behind center
    mask = np.zeros((384, 480), dtype=np.uint8)
    _blob(mask, 192, 100)
    cons = extract_contours(SegmentationMap(pixels=mask))
    assert len(cons) == 1
    assert select_waypoint(cons, CENTER) == cons[0].centroid

    # forward-half-plane filter: near-ahead beats far-behind
    mask = np.zeros((384, 480), dtype=np.uint8)
    _blob(mask, 192, 20)    # far aft
    _blob(mask, 192, 260)   # close forward
    cons = extract_contours(SegmentationMap(pixels=mask))
    assert len(cons) == 2
    assert select_waypoint(cons, CENTER) == (260.0, 192.0)

    # 500 random multi-contour maps against a brute-force scan
    rng = np.random.default_rng(1234)
    lattice_v = np.arange(2, 382, 6)   # 3x3 blobs on this grid never touch
    lattice_u = np.arange(2, 478, 6)
    n_cells = lattice_v.size * lattice_u.size
    for _ in range(500):
        k = int(rng.integers(2, 7))
        cells = rng.choice(n_cells, size=k, replace=False)
        mask = np.zeros((384, 480), dtype=np.uint8)
        for c in cells:
            _blob(mask, int(lattice_v[c // lattice_u.size]),
                  int(lattice_u[c % lattice_u.size]))
        cons = extract_contours(SegmentationMap(pixels=mask))
        assert len(cons) == k
        got = select_waypoint(cons, CENTER)
        pool = [c for c in cons if c.centroid_u > CENTER[0]] or cons
        best, best_d2 = None, -1.0
        for c in pool:
            d2 = ((c.centroid_u - CENTER[0]) ** 2
                  + (c.centroid_v - CENTER[1]) ** 2)
            if d2 > best_d2:
                best, best_d2 = c, d2
        assert got == best.centroid

    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    print(f"[PASS] C1: waypoint selection matches brute force on 500 random "
          f"maps ({elapsed:.2f} s)")


def test_c02_pipeline_oracle_agreement():
    t0 = time.perf_counter()
    path = CavelinePath([[-5.0, 0.0, 1.0], [5.0, 0.0, 1.0]], line_width=0.001)
    K = CameraConfig().intrinsics()
    calib = Calibration(K=K, camera_to_sonar_offset=np.zeros(3),
                        initial_attitude=EulerAngles(0.0, 0.0, 0.0))
    rng = np.random.default_rng(77)
    within = 0
    worst = 0.0
    for _ in range(1000):
        h = rng.uniform(0.3, 0.9)
        d = rng.uniform(-0.4, 0.4) * h
        state = VehicleState(
            position=np.array([rng.uniform(-3.0, 3.0), d, 1.0 - h]),
            attitude=EulerAngles(0.0, 0.0, rng.uniform(-math.pi, math.pi)))
        seg = render_downcam(state, path, K)
        sonar = read_sonar(state, 1.0, rng, 0.0)
        res = tracking_error_pipeline(seg, ImuReading(state.attitude, 0.0),
                                      sonar, calib)
        assert res.valid
        tol = sonar.range / K.fy  # one pixel-equivalent, meters
        err = abs(res.delta - tracking_error_oracle(state, path))
        worst = max(worst, err / tol)
        within += err <= tol
    elapsed = time.perf_counter() - t0
    assert within >= 990
    assert worst <= 3.0
    assert elapsed < 30.0
    print(f"[PASS] C2: {within}/1000 poses within one pixel-equivalent, "
          f"worst {worst:.2f} px-equiv ({elapsed:.1f} s)")


def test_c03_frame_chain_exactness():
    # with both attitudes identity the chain must reduce, to rounding,
    # to delta = range * (v - cy) / fy, and the rig offset must vanish
    K = CameraConfig().intrinsics()
    level = EulerAngles(0.0, 0.0, 0.0)
    cases = [
        (292, 240, 2.0, (0.0, 0.0, 0.0), 291.0),
        (92, 240, 0.7, (-0.08, 0.0, 0.04), 93.0),
        (192, 300, 1.3, (0.05, -0.02, 0.01), 192.0),
    ]
    for v, u, rng_m, offset, v_edge in cases:
        mask = np.zeros((384, 480), dtype=np.uint8)
        _blob(mask, v, u)
        res = tracking_error_pipeline(
            SegmentationMap(pixels=mask), ImuReading(level, 0.0),
            SonarReading(rng_m, 0.0),
            Calibration(K=K, camera_to_sonar_offset=np.array(offset),
                        initial_attitude=level))
        expected = rng_m * (v_edge - K.cy) / K.fy
        assert res.valid
        assert abs(res.signed_delta - expected) <= 1e-9
        assert res.delta == abs(res.signed_delta)
    print("[PASS] C3: pipeline reduces to range*(dv/fy) within 1e-9 on "
          "constructed inputs")


def test_c04_depth_hold(calm_trial):
    scenario, result, elapsed, _ = calm_trial
    assert result.termination == "duration"
    rows = [r for r in result.log.rows if r.t >= 10.0]
    mean_abs = float(np.mean([abs(r.depth_error) for r in rows]))
    speedup = scenario.duration / elapsed
    assert mean_abs <= 0.05
    assert elapsed < 10.0
    assert speedup >= 50.0
    print(f"[PASS] C4: mean |depth error| {mean_abs * 100.0:.2f} cm after "
          f"10 s warmup, {speedup:.0f}x real time")


def test_c05_loop_completion(calm_trial):
    scenario, result, _, _ = calm_trial
    assert all(r.mode == "TRACKING" for r in result.log.rows)
    path = scenario.path
    loop = path.total_length
    rows = result.log.rows
    start = np.array([rows[0].x, rows[0].y])
    s_prev = arclength_projection(path, [rows[0].x, rows[0].y, 0.0])
    progress = 0.0
    return_dist = None
    for r in rows[1:]:
        s = arclength_projection(path, [r.x, r.y, 0.0])
        ds = s - s_prev
        if ds > loop / 2.0:
            ds -= loop
        elif ds < -loop / 2.0:
            ds += loop
        progress += ds
        s_prev = s
        if return_dist is None and progress >= loop:
            return_dist = float(np.hypot(r.x - start[0], r.y - start[1]))
    assert progress >= 6.0
    assert return_dist is not None and return_dist <= 0.3
    print(f"[PASS] C5: loop progress {progress:.2f} m, return within "
          f"{return_dist:.3f} m, never LOST")


def test_c06_tuning_order_reproduction():
    t0 = time.perf_counter()
    scenario = load_scenario(SCENARIOS / "rectangle_gusty.yaml")

    rows = grid_search(
        GridSpec(scenario=scenario, repeats=5, pairs=DEFAULT_HEADING_PAIRS),
        GainsTarget.HEADING, workers=4)
    means = {(r.kp, r.kd): r.mean for r in rows}
    rank = next(i for i, r in enumerate(rows) if (r.kp, r.kd) == (3.4, 0.9))
    assert math.isfinite(means[(3.4, 0.9)])
    assert rank < 3
    assert means[(3.4, 0.9)] < means[(1.0, 0.0)]

    depth_rows = grid_search(
        GridSpec(scenario=scenario, repeats=5,
                 pairs=[(500.0, 0.0), (600.0, 50.0)]),
        GainsTarget.DEPTH, workers=4)
    dmeans = {(r.kp, r.kd): r.mean for r in depth_rows}
    assert dmeans[(600.0, 50.0)] < dmeans[(500.0, 0.0)]

    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    print(f"[PASS] C6: heading gains (3.4, 0.9) rank {rank + 1}/10 at "
          f"{means[(3.4, 0.9)] * 100.0:.2f} cm, beat (1.0, 0.0) at "
          f"{means[(1.0, 0.0)] * 100.0:.2f} cm; depth (600, 50) beat "
          f"(500, 0) ({elapsed:.0f} s)")


def test_c07_latency_overshoot_monotonicity():
    scenario = load_scenario(SCENARIOS / "corner_latency.yaml")
    maxima = []
    for cam_period in (0.2, 0.5, 1.0):
        result = run_trial(replace(scenario, camera_period=cam_period))
        assert result.termination == "duration"
        maxima.append(max(abs(r.delta_oracle) for r in result.log.rows
                          if r.t >= 10.0))
    assert maxima[0] < maxima[1] < maxima[2]
    print(f"[PASS] C7: corner error grows with camera latency: "
          f"{maxima[0]:.3f} < {maxima[1]:.3f} < {maxima[2]:.3f} m")


def test_c08_recovery_contract():
    # blacked-out camera: spin exactly one revolution, then abort (exit 4)
    assert cli_main(["run", "--scenario",
                     str(SCENARIOS / "blackout.yaml")]) == 4

    cfg = ServoConfig(center_u=CENTER[0], center_v=CENTER[1],
                      target_depth=0.35, cruise_speed=0.4)
    blank = SegmentationMap(pixels=np.zeros((384, 480), dtype=np.uint8))
    state = ServoState()
    for _ in range(59):
        _, state = servo_step(blank, state, cfg, 0.2)
        assert state.mode is ServoMode.LOST
    _, state = servo_step(blank, state, cfg, 0.2)
    assert state.mode is ServoMode.ABORTED
    assert state.recovery_rotation_accum == TWO_PI

    # re-exposing the line mid-spin resumes tracking instead
    seen = np.zeros((384, 480), dtype=np.uint8)
    _blob(seen, 192, 300)
    state = ServoState()
    for _ in range(30):
        _, state = servo_step(blank, state, cfg, 0.2)
    sp, state = servo_step(SegmentationMap(pixels=seen), state, cfg, 0.2)
    assert state.mode is ServoMode.TRACKING
    assert state.recovery_rotation_accum == 0.0
    assert sp.surge_setpoint > 0.0
    print("[PASS] C8: blackout aborts after exactly one revolution with "
          "exit 4; mid-spin reacquire resumes TRACKING")


def test_c09_determinism(calm_trial, tmp_path):
    scenario, _, _, first_bytes = calm_trial
    rerun_dir = tmp_path / "rerun"
    run_trial(scenario, out_dir=str(rerun_dir))
    assert (rerun_dir / "trial.csv").read_bytes() == first_bytes

    short = replace(scenario, duration=14.0)
    pairs = [(3.4, 0.9), (1.0, 0.0)]
    base = grid_search(GridSpec(scenario=short, repeats=1, pairs=pairs),
                       GainsTarget.HEADING, workers=1)
    flipped = grid_search(GridSpec(scenario=short, repeats=1,
                                   pairs=list(reversed(pairs))),
                          GainsTarget.HEADING, workers=1)
    parallel = grid_search(GridSpec(scenario=short, repeats=1, pairs=pairs),
                           GainsTarget.HEADING, workers=4)
    assert base == flipped == parallel
    print("[PASS] C9: identical seeds give byte-identical CSVs; grid rows "
          "independent of order and worker count")


def test_c10_factor_of_safety():
    fos = factor_of_safety(240.0, 15.3)
    assert abs(fos - 240.0 / 15.3) <= 1e-9
    assert round(fos, 3) == 15.686
    assert fos > 4.0 > 2.0  # clears both review thresholds
    with pytest.raises(ValueError):
        factor_of_safety(-1.0, 15.3)
    with pytest.raises(ValueError):
        factor_of_safety(240.0, 0.0)
    print(f"[PASS] C10: factor of safety 240/15.3 = {fos:.3f}, above both "
          f"thresholds")


def test_c11_numerical_hygiene():
    rng = np.random.default_rng(2026)
    still = CurrentField()
    neutral = VehicleParams(
        buoyancy_force=8.8 * GRAVITY,
        center_of_buoyancy_offset=np.array([0.0, 0.0, 0.0]))

    # rotation orthonormality
    eye = np.eye(3)
    for _ in range(1000):
        ang = EulerAngles(*rng.uniform(-math.pi, math.pi, size=3))
        R = euler_to_rotation(ang)
        assert np.allclose(R @ R.T, eye, atol=1e-12)
        assert abs(np.linalg.det(R) - 1.0) < 1e-12

    # drag dissipativity inside the reachable envelope
    for _ in range(1000):
        state = VehicleState(
            position=np.array([0.0, 0.0, 5.0]),
            attitude=EulerAngles(*rng.uniform(-0.5, 0.5, size=3)),
            linear_velocity=rng.uniform(-1.0, 1.0, size=3),
            angular_velocity=rng.uniform(-1.0, 1.0, size=3))
        nxt = step_dynamics(state, np.zeros(4), neutral, still, 0.01)
        assert (np.linalg.norm(nxt.linear_velocity)
                <= np.linalg.norm(state.linear_velocity) + 1e-12)
        assert (np.linalg.norm(nxt.angular_velocity)
                <= np.linalg.norm(state.angular_velocity) + 1e-12)

    # positive trim always starts an ascent from rest
    for _ in range(1000):
        params = VehicleParams(
            buoyancy_force=rng.uniform(1.001, 1.2) * 8.8 * GRAVITY,
            center_of_buoyancy_offset=np.array([0.0, 0.0, 0.0]))
        state = VehicleState(position=np.array([0.0, 0.0, 5.0]))
        nxt = step_dynamics(state, np.zeros(4), params, still, 0.01)
        assert nxt.linear_velocity[2] < 0.0  # z is down

    # full-surge terminal speed sqrt(F / k) at random throttle
    for _ in range(1000):
        throttle = rng.uniform(0.3, 1.0)
        cmd = mix_commands(throttle, 0.0, 0.0, 0.0, neutral)
        state = VehicleState(position=np.array([0.0, 0.0, 5.0]))
        for _ in range(250):
            state = step_dynamics(state, cmd, neutral, still, 0.01)
        expected = math.sqrt(35.0 * throttle / 140.0)
        assert state.linear_velocity[0] == pytest.approx(expected, rel=1e-6)

    # kp-only PID output is linear in the error
    for _ in range(1000):
        kp = rng.uniform(0.1, 10.0)
        err = rng.uniform(-5.0, 5.0)
        lam = rng.uniform(0.1, 3.0)
        gains = PidGains(kp=kp)
        out, _ = pid_update(gains, PidState(), err, 0.2)
        out_scaled, _ = pid_update(gains, PidState(), lam * err, 0.2)
        assert out == pytest.approx(kp * err, rel=1e-12, abs=1e-15)
        assert out_scaled == pytest.approx(lam * out, rel=1e-9, abs=1e-15)
    print("[PASS] C11: rotation, dissipativity, ascent, terminal-velocity, "
          "and PID-linearity properties hold over 1000 cases each")
