"""Caveline paths, water current, and scenario bundles.

The world model is deliberately small: a flat floor at a fixed depth, a
polyline caveline laid on (or near) the floor, and a time-varying but
spatially uniform current. Everything else lives on the vehicle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MIN_VERTEX_SEPARATION = 1e-6


class CavelinePath:
    """Polyline guide line in world coordinates.

    vertices: (n, 3) float array, z positive down.
    closed: final vertex connects back to the first.
    line_width: physical diameter of the line in meters.
    """

    def __init__(self, vertices, closed: bool = False, line_width: float = 0.01):
        pts = np.asarray(vertices, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("vertices must have shape (n, 3)")
        if pts.shape[0] < 2:
            raise ValueError("a path needs at least two vertices")
        if not np.all(np.isfinite(pts)):
            raise ValueError("vertices must be finite")
        diffs = np.diff(pts, axis=0)
        if np.any(np.linalg.norm(diffs, axis=1) <= MIN_VERTEX_SEPARATION):
            raise ValueError("consecutive vertices must be distinct")
        if closed and np.linalg.norm(pts[-1] - pts[0]) <= MIN_VERTEX_SEPARATION:
            raise ValueError("closed paths must not repeat the first vertex")
        if line_width <= 0.0:
            raise ValueError("line_width must be positive")
        self.vertices = pts
        self.closed = bool(closed)
        self.line_width = float(line_width)

    def segments(self) -> np.ndarray:
        """(m, 2, 3) array of segment endpoints, wrap segment last."""
        a = self.vertices
        if self.closed:
            b = np.roll(a, -1, axis=0)
            return np.stack([a, b], axis=1)
        return np.stack([a[:-1], a[1:]], axis=1)

    @property
    def total_length(self) -> float:
        segs = self.segments()
        return float(np.linalg.norm(segs[:, 1] - segs[:, 0], axis=1).sum())

    @property
    def sloped(self) -> bool:
        z = self.vertices[:, 2]
        return bool(z.max() - z.min() > 1e-9)

    def point_at(self, s: float) -> np.ndarray:
        """Point at arclength s from the first vertex (clamped to the
        ends for open paths, wrapped for closed ones)."""
        total = self.total_length
        s = s % total if self.closed else min(max(s, 0.0), total)
        for a, b in self.segments():
            seg_len = float(np.linalg.norm(b - a))
            if s <= seg_len:
                return a + (s / seg_len) * (b - a)
            s -= seg_len
        return self.vertices[0 if self.closed else -1].copy()


def _point_to_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Closest point on segment ab to p. Returns (point, distance, t)."""
    d = b - a
    denom = float(d @ d)
    if denom < 1e-18:
        t = 0.0
    else:
        t = float((p - a) @ d) / denom
        t = min(1.0, max(0.0, t))
    q = a + t * d
    return q, float(np.linalg.norm(p - q)), t


def nearest_point_on_path(path: CavelinePath, p) -> tuple[np.ndarray, float]:
    """Exact nearest point on the polyline to a 3D point.

    Returns (point, distance). Ties go to the earlier segment.
    """
    q = np.asarray(p, dtype=float).reshape(3)
    best_pt, best_d = None, math.inf
    for a, b in path.segments():
        pt, dist, _ = _point_to_segment(q, a, b)
        if dist < best_d:
            best_pt, best_d = pt, dist
    return best_pt, best_d


def arclength_projection(path: CavelinePath, p) -> float:
    """Arclength coordinate of the nearest path point, from vertex 0.

    Uses horizontal (x, y) distance so a vehicle above the line
    projects onto it; used for loop-progress bookkeeping.
    """
    q = np.asarray(p, dtype=float).reshape(3)
    q2 = q[:2]
    best_s, best_d, run = 0.0, math.inf, 0.0
    for a, b in path.segments():
        _, dist, t = _point_to_segment(q2, a[:2], b[:2])
        seg_len = float(np.linalg.norm(b - a))
        if dist < best_d:
            best_d = dist
            best_s = run + t * seg_len
        run += seg_len
    return best_s


def build_rectangle_loop(width_m: float, height_m: float, depth_m: float,
                         line_width_m: float) -> CavelinePath:
    """Closed 4-vertex rectangle with one corner at the origin."""
    if width_m <= 0 or height_m <= 0:
        raise ValueError("rectangle sides must be positive")
    pts = [
        (0.0, 0.0, depth_m),
        (width_m, 0.0, depth_m),
        (width_m, height_m, depth_m),
        (0.0, height_m, depth_m),
    ]
    return CavelinePath(pts, closed=True, line_width=line_width_m)


def build_hexagon_loop(circumradius_m: float, depth_m: float,
                       line_width_m: float) -> CavelinePath:
    """Closed regular hexagon centered on the origin."""
    if circumradius_m <= 0:
        raise ValueError("circumradius must be positive")
    pts = []
    for k in range(6):
        ang = math.pi / 3.0 * k
        pts.append((circumradius_m * math.cos(ang),
                    circumradius_m * math.sin(ang), depth_m))
    return CavelinePath(pts, closed=True, line_width=line_width_m)


def build_lawnmower(rows: int, row_length_m: float, row_spacing_m: float,
                    depth_m: float, line_width_m: float) -> CavelinePath:
    """Open boustrophedon path: `rows` parallel passes along x joined by
    spacing segments along y."""
    if rows < 2:
        raise ValueError("rows must be >= 2")
    if row_length_m <= 0:
        raise ValueError("row_length_m must be positive")
    pts = []
    for k in range(rows):
        y = k * row_spacing_m
        if k % 2 == 0:
            pts.append((0.0, y, depth_m))
            pts.append((row_length_m, y, depth_m))
        else:
            pts.append((row_length_m, y, depth_m))
            pts.append((0.0, y, depth_m))
    return CavelinePath(pts, closed=False, line_width=line_width_m)


@dataclass
class CurrentField:
    """Uniform current: steady flow plus a sinusoidal gust per axis.

    sample_current(t) = velocity + gust_amplitude * sin(2*pi*t/gust_period)
    """

    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gust_amplitude: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gust_period: float = 10.0

    def __post_init__(self):
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(3)
        self.gust_amplitude = np.asarray(self.gust_amplitude, dtype=float).reshape(3)
        if np.any(self.gust_amplitude) and self.gust_period <= 0.0:
            raise ValueError("gust_period must be positive when gusts are enabled")

    def sample_current(self, t: float) -> np.ndarray:
        if not np.any(self.gust_amplitude):
            return self.velocity.copy()
        return self.velocity + self.gust_amplitude * math.sin(
            2.0 * math.pi * t / self.gust_period)


def sample_current(field: CurrentField, t: float) -> np.ndarray:
    return field.sample_current(t)


@dataclass
class Scenario:
    """Complete, self-contained description of one simulated trial.

    Heavier optional objects (vehicle params, camera config, noise
    model) default to None here and are substituted by the simulation
    loop, so this module stays import-light.
    """

    path: CavelinePath
    floor_depth: float
    target_depth: float
    duration: float = 120.0
    seed: int = 0

    current: CurrentField = field(default_factory=CurrentField)
    noise: "NoiseModel | None" = None
    vehicle: "VehicleParams | None" = None
    camera: "CameraConfig | None" = None

    initial_position: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.05]))
    initial_yaw: float = 0.0
    initial_roll: float = 0.0
    initial_pitch: float = 0.0

    dt: float = 0.01
    camera_period: float = 0.2
    eval_period: float = 1.0 / 0.6

    heading_gains: tuple = (3.4, 0.9, 0.0)   # kp, kd, ki
    depth_gains: tuple = (600.0, 50.0, 0.0)  # kp, kd, ki
    depth_gain_scale: float = 1.0 / 600.0

    cruise_speed: float = 0.5
    psi_slow_deg: float = 60.0
    recovery_yaw_rate: float = math.radians(30.0)
    min_contour_area: int = 5

    imu_sigma: float = 0.0
    depth_sigma: float = 0.002
    sonar_sigma: float = 0.0
    imu_period: float = 0.05
    depth_period: float = 0.05
    sonar_period: float = 0.1

    def __post_init__(self):
        self.initial_position = np.asarray(self.initial_position, dtype=float).reshape(3)
        if not (0.0 < self.target_depth < self.floor_depth):
            raise ValueError("require 0 < target_depth < floor_depth")
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        if not (0.0 < self.dt <= 0.1):
            raise ValueError("dt must lie in (0, 0.1]")
        for name in ("camera_period", "eval_period", "imu_period",
                     "depth_period", "sonar_period"):
            if getattr(self, name) < self.dt:
                raise ValueError(f"{name} must be >= dt")
        if self.cruise_speed < 0.0:
            raise ValueError("cruise_speed must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        self.heading_gains = _normalize_gains(self.heading_gains, "heading_gains")
        self.depth_gains = _normalize_gains(self.depth_gains, "depth_gains")


def _normalize_gains(gains, name: str) -> tuple:
    vals = tuple(float(g) for g in gains)
    if len(vals) == 2:
        vals = vals + (0.0,)
    if len(vals) != 3:
        raise ValueError(f"{name} must be (kp, kd) or (kp, kd, ki)")
    return vals
