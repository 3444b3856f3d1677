"""Tracking-error measurement, trial statistics, and gain tuning.

Two independent error measures exist on purpose. The *pipeline* error
rebuilds the cross-track distance the way the real system does: nearest
contour edge pixel, back-projected through the camera intrinsics,
scaled by the sonar range, rotated into the navigation frame fixed at
trial start. The *oracle* error is plain geometry on ground-truth
state. Their agreement (within a pixel-equivalent) is itself a tested
property.
"""

from __future__ import annotations

import csv
import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import accel
from .geometry import (CameraIntrinsics, EulerAngles, euler_to_rotation,
                       pixel_to_ray, relative_rotation)
from .perception import DEFAULT_MIN_AREA_PX, SegmentationMap
from .world import CavelinePath, Scenario, _point_to_segment

DEGENERATE_RAY_EPS = 1e-6

# gain pairs swept when tuning each controller, and the chosen defaults
DEFAULT_HEADING_PAIRS = [
    (1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (3.0, 0.5), (3.5, 0.5),
    (3.5, 0.7), (3.4, 0.7), (3.4, 0.9), (3.5, 0.9), (3.4, 1.0),
]
DEFAULT_DEPTH_PAIRS = [
    (500.0, 0.0), (500.0, 10.0), (550.0, 10.0), (600.0, 10.0), (600.0, 20.0),
    (600.0, 30.0), (600.0, 50.0), (600.0, 100.0), (650.0, 200.0), (720.0, 300.0),
]
CHOSEN_HEADING_GAINS = (3.4, 0.9)
CHOSEN_DEPTH_GAINS = (600.0, 50.0)


@dataclass(frozen=True)
class Calibration:
    """Per-trial constants for the pipeline error chain."""

    K: CameraIntrinsics
    camera_to_sonar_offset: np.ndarray  # meters, camera frame
    initial_attitude: EulerAngles       # defines the navigation frame

    def __post_init__(self):
        off = np.asarray(self.camera_to_sonar_offset, dtype=float).reshape(3)
        if not np.all(np.isfinite(off)):
            raise ValueError("camera_to_sonar_offset must be finite")
        object.__setattr__(self, "camera_to_sonar_offset", off)


@dataclass(frozen=True)
class PipelineResult:
    valid: bool
    delta: float = math.nan         # |y|, meters
    signed_delta: float = math.nan  # y, meters (kept for logs)
    degenerate: bool = False        # ray parallel to the floor plane


def tracking_error_pipeline(segmap: SegmentationMap, imu, sonar,
                            calib: Calibration,
                            min_area_px: int = DEFAULT_MIN_AREA_PX) -> PipelineResult:
    """Sensor-based cross-track error.

    Picks the contour edge pixel nearest the image center, casts it to
    a ray, scales by the sonar range through the relative rotation
    since trial start, and reads off the lateral coordinate. Returns an
    invalid result when nothing usable is in view (empty map, small
    contours only, no sonar return) and flags the degenerate case of a
    ray parallel to the floor.
    """
    if sonar is None:
        return PipelineResult(valid=False)
    labels, count = accel.label_components(segmap.pixels)
    if count == 0:
        return PipelineResult(valid=False)
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    keep = areas >= min_area_px
    keep[0] = False
    m = segmap.pixels.astype(bool)
    interior = np.zeros_like(m)
    interior[1:-1, 1:-1] = (m[1:-1, 1:-1] & m[:-2, 1:-1] & m[2:, 1:-1]
                            & m[1:-1, :-2] & m[1:-1, 2:])
    edge = m & ~interior & keep[labels]
    vs, us = np.nonzero(edge)
    if us.size == 0:
        return PipelineResult(valid=False)
    d2 = (us - calib.K.cx) ** 2 + (vs - calib.K.cy) ** 2
    i = int(np.argmin(d2))  # ties: first in row-major order
    ray = pixel_to_ray(calib.K, float(us[i]), float(vs[i]))

    r_init = euler_to_rotation(calib.initial_attitude)
    r_now = euler_to_rotation(imu.attitude)
    r_rel = relative_rotation(r_init, r_now)
    abc = r_rel @ ray
    c = float(abc[2])
    if abs(c) < DEGENERATE_RAY_EPS:
        return PipelineResult(valid=False, degenerate=True)
    lam = float(r_rel[2, 2]) * float(sonar.range) / c
    p_s = lam * abc + calib.camera_to_sonar_offset
    p_n = p_s - calib.camera_to_sonar_offset  # the rig offset cancels
    y = float(p_n[1])
    return PipelineResult(valid=True, delta=abs(y), signed_delta=y)


def tracking_error_oracle(state, path: CavelinePath) -> float:
    """Ground-truth cross-track error: distance from the camera's
    optical center (the body origin) to the nearest point of the line,
    measured in the line's own (horizontal) plane."""
    p2 = np.asarray(state.position, dtype=float)[:2]
    best = math.inf
    for a, b in path.segments():
        _, dist, _ = _point_to_segment(p2, a[:2], b[:2])
        if dist < best:
            best = dist
    return best


@dataclass(frozen=True)
class LogRow:
    t: float
    x: float
    y: float
    z: float
    roll: float
    pitch: float
    yaw: float
    psi: float
    delta_pipeline: float | None  # signed meters; None = no measurement
    delta_oracle: float
    depth_error: float            # z - target, meters
    mode: str

    def as_csv_fields(self) -> list:
        vals = [self.t, self.x, self.y, self.z, self.roll, self.pitch,
                self.yaw, self.psi]
        out = [repr(float(v)) for v in vals]
        out.append("" if self.delta_pipeline is None
                   else repr(float(self.delta_pipeline)))
        out.append(repr(float(self.delta_oracle)))
        out.append(repr(float(self.depth_error)))
        out.append(self.mode)
        return out


CSV_COLUMNS = ["t", "x", "y", "z", "roll", "pitch", "yaw", "psi",
               "delta_pipeline", "delta_oracle", "depth_error", "mode"]


@dataclass
class TrialLog:
    rows: list = field(default_factory=list)

    def append(self, row: LogRow):
        if self.rows and row.t <= self.rows[-1].t:
            raise ValueError("log timestamps must be strictly increasing")
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in self.rows:
                w.writerow(row.as_csv_fields())

    @classmethod
    def from_csv(cls, path) -> "TrialLog":
        log = cls()
        with open(path, "r", newline="") as f:
            r = csv.reader(f)
            header = next(r, None)
            if header != CSV_COLUMNS:
                raise ValueError(f"unexpected trial CSV header: {header}")
            for rec in r:
                if len(rec) != len(CSV_COLUMNS):
                    raise ValueError(f"malformed trial CSV row: {rec}")
                log.append(LogRow(
                    t=float(rec[0]), x=float(rec[1]), y=float(rec[2]),
                    z=float(rec[3]), roll=float(rec[4]), pitch=float(rec[5]),
                    yaw=float(rec[6]), psi=float(rec[7]),
                    delta_pipeline=None if rec[8] == "" else float(rec[8]),
                    delta_oracle=float(rec[9]), depth_error=float(rec[10]),
                    mode=rec[11],
                ))
        return log


@dataclass(frozen=True)
class Stats:
    mean: float
    std: float
    max: float
    count: int

    @classmethod
    def from_values(cls, values) -> "Stats":
        arr = np.asarray(values, dtype=float)
        if arr.size == 0:
            raise ValueError("cannot summarize zero values")
        return cls(mean=float(arr.mean()), std=float(arr.std()),
                   max=float(arr.max()), count=int(arr.size))


@dataclass(frozen=True)
class TrialSummary:
    delta: Stats
    depth: Stats
    delta_missing: int  # post-warmup rows with no pipeline measurement

    def __iter__(self):
        # allows `delta_stats, depth_stats = summarize(...)`
        return iter((self.delta, self.depth))


def summarize(log: TrialLog, warmup_s: float) -> TrialSummary:
    """Absolute-error statistics over rows past the warmup window.

    Rows without a pipeline measurement are excluded from the delta
    statistics and reported in delta_missing instead.
    """
    rows = [r for r in log.rows if r.t >= warmup_s]
    if not rows:
        raise ValueError("no log rows after warmup")
    deltas = [abs(r.delta_pipeline) for r in rows if r.delta_pipeline is not None]
    missing = len(rows) - len(deltas)
    if not deltas:
        raise ValueError("no delta measurements after warmup")
    depth = [abs(r.depth_error) for r in rows]
    return TrialSummary(delta=Stats.from_values(deltas),
                        depth=Stats.from_values(depth),
                        delta_missing=missing)


def factor_of_safety(yield_strength_mpa: float, max_stress_mpa: float) -> float:
    """Ratio of yield strength to peak working stress."""
    if yield_strength_mpa <= 0.0 or max_stress_mpa <= 0.0:
        raise ValueError("strength and stress must be positive")
    return yield_strength_mpa / max_stress_mpa


class GainsTarget(enum.Enum):
    HEADING = "heading"
    DEPTH = "depth"


@dataclass
class GridSpec:
    """Gain sweep: either a kp x kd product or an explicit pair list."""

    scenario: Scenario
    repeats: int = 5
    kp_values: list | None = None
    kd_values: list | None = None
    pairs: list | None = None

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        have_grid = bool(self.kp_values) and bool(self.kd_values)
        have_pairs = bool(self.pairs)
        if have_grid == have_pairs:
            raise ValueError("give either kp_values+kd_values or pairs")

    def pair_list(self) -> list:
        if self.pairs:
            return [(float(kp), float(kd)) for kp, kd in self.pairs]
        return [(float(kp), float(kd))
                for kp in self.kp_values for kd in self.kd_values]


@dataclass(frozen=True)
class GridRow:
    kp: float
    kd: float
    mean: float  # meters; inf when any repeat aborted
    std: float
    failures: int  # aborted repeats
    samples: int   # pooled post-warmup measurements


def derive_trial_seed(base_seed: int, target: GainsTarget, kp: float,
                      kd: float, repeat: int) -> int:
    """Per-trial seed keyed by value, not enumeration order, so grid
    results do not depend on sweep order or worker count."""
    kp_bits = int(np.float64(kp).view(np.uint64))
    kd_bits = int(np.float64(kd).view(np.uint64))
    ss = np.random.SeedSequence(
        [int(base_seed), int(target is GainsTarget.DEPTH), int(repeat),
         kp_bits, kd_bits])
    return int(ss.generate_state(1, np.uint64)[0])


def _grid_trial(task):
    """Run one (pair, repeat) trial; returns its pooled-ready results."""
    kp, kd, repeat, seed, scenario, target, warmup_s = task
    from . import simloop  # deferred: simloop imports this module

    if target is GainsTarget.HEADING:
        sc = replace(scenario, heading_gains=(kp, kd, 0.0),
                     depth_gains=(*CHOSEN_DEPTH_GAINS, 0.0), seed=seed)
    else:
        sc = replace(scenario, depth_gains=(kp, kd, 0.0),
                     heading_gains=(*CHOSEN_HEADING_GAINS, 0.0), seed=seed)
    result = simloop.run_trial(sc)
    aborted = result.termination == "aborted"
    if target is GainsTarget.HEADING:
        errors = [abs(r.delta_pipeline) for r in result.log.rows
                  if r.t >= warmup_s and r.delta_pipeline is not None]
    else:
        errors = [abs(r.depth_error) for r in result.log.rows
                  if r.t >= warmup_s]
    return kp, kd, repeat, aborted, errors, result.log


def grid_search(spec: GridSpec, gains_target: GainsTarget, workers: int = 1,
                warmup_s: float = 10.0, out_dir=None) -> list:
    """Sweep gain pairs, `repeats` trials each, distinct derived seeds.

    Returns GridRows sorted ascending by mean error (ties by kp, kd).
    A pair with any aborted repeat becomes a failure row with infinite
    mean. Results are deterministic for a given scenario seed and
    independent of enumeration order and worker count.
    """
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    tasks = [(kp, kd, rep, derive_trial_seed(spec.scenario.seed, gains_target,
                                             kp, kd, rep),
              spec.scenario, gains_target, warmup_s)
             for kp, kd in spec.pair_list()
             for rep in range(spec.repeats)]
    if workers > 1:
        import multiprocessing
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as ex:
            outcomes = list(ex.map(_grid_trial, tasks))
    else:
        outcomes = [_grid_trial(t) for t in tasks]

    pooled: dict = {}
    for kp, kd, repeat, aborted, errors, log in outcomes:
        entry = pooled.setdefault((kp, kd), {"errors": [], "failures": 0})
        entry["errors"].extend(errors)
        entry["failures"] += int(aborted)
        if out_dir is not None:
            name = f"trial_{gains_target.value}_kp{kp:g}_kd{kd:g}_r{repeat}.csv"
            log.to_csv(f"{out_dir}/{name}")

    rows = []
    for (kp, kd), entry in pooled.items():
        if entry["failures"] > 0 or not entry["errors"]:
            rows.append(GridRow(kp, kd, math.inf, math.inf,
                                entry["failures"], len(entry["errors"])))
        else:
            s = Stats.from_values(entry["errors"])
            rows.append(GridRow(kp, kd, s.mean, s.std, 0, s.count))
    rows.sort(key=lambda r: (r.mean, r.kp, r.kd))
    return rows


def write_grid_csv(rows: list, path) -> None:
    with open(path, "w", newline="\n") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["kp", "kd", "mean_cm", "std_cm", "failures"])
        for r in rows:
            w.writerow([repr(float(r.kp)), repr(float(r.kd)),
                        repr(float(r.mean * 100.0)), repr(float(r.std * 100.0)),
                        str(r.failures)])
