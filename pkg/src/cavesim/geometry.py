"""Rotations, frames, and the pinhole camera model.

Conventions used throughout the package:

* World frame {G}: x north, y east, z positive DOWN (depth).
* Body frame {R}: x forward, y starboard, z down.
* Attitude is intrinsic Z-Y-X (yaw, then pitch, then roll); the matrix
  returned by :func:`euler_to_rotation` maps body vectors into world.
* The down-looking camera shares the body axes: image u (width) grows
  toward vehicle-forward, image v (height) grows toward starboard.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(angle):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    return angle - TWO_PI * np.ceil((angle - math.pi) / TWO_PI)


def vec3(x, y, z):
    return np.array([float(x), float(y), float(z)])


@dataclass
class EulerAngles:
    """Intrinsic Z-Y-X attitude, radians."""

    roll: float
    pitch: float
    yaw: float

    def as_array(self):
        return np.array([self.roll, self.pitch, self.yaw])

    def wrapped(self):
        return EulerAngles(
            float(wrap_angle(self.roll)),
            float(wrap_angle(self.pitch)),
            float(wrap_angle(self.yaw)),
        )


def euler_to_rotation(angles: EulerAngles) -> np.ndarray:
    """Body-to-world rotation matrix, R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    cr, sr = math.cos(angles.roll), math.sin(angles.roll)
    cp, sp = math.cos(angles.pitch), math.sin(angles.pitch)
    cy, sy = math.cos(angles.yaw), math.sin(angles.yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def rotation_to_euler(R: np.ndarray) -> EulerAngles:
    """Inverse of :func:`euler_to_rotation`.

    At the pitch = +-pi/2 gimbal singularity roll is defined as zero and
    the remaining freedom is assigned to yaw.
    """
    sp = -float(R[2, 0])
    sp = min(1.0, max(-1.0, sp))
    pitch = math.asin(sp)
    if abs(sp) > 1.0 - 1e-12:
        # singular: only yaw -+ roll observable, pick roll = 0
        return EulerAngles(0.0, pitch, math.atan2(-float(R[0, 1]), float(R[1, 1])))
    roll = math.atan2(float(R[2, 1]), float(R[2, 2]))
    yaw = math.atan2(float(R[1, 0]), float(R[0, 0]))
    return EulerAngles(roll, pitch, yaw)


def relative_rotation(R_from: np.ndarray, R_to: np.ndarray) -> np.ndarray:
    """Rotation taking vectors expressed in frame ``to`` into frame ``from``,
    both given as body-to-world matrices."""
    return R_from.T @ R_to


def is_rotation(R: np.ndarray, tol: float = 1e-9) -> bool:
    if R.shape != (3, 3):
        return False
    if not np.all(np.isfinite(R)):
        return False
    err = np.abs(R.T @ R - np.eye(3)).max()
    return err <= tol and abs(np.linalg.det(R) - 1.0) <= tol


@dataclass
class RigidTransform:
    """Pose of frame b in frame a: x_a = rotation @ x_b + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        if not is_rotation(self.rotation, tol=1e-6):
            raise ValueError("rotation is not a proper rotation matrix")

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -(self.rotation.T @ self.translation))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )


def transform_point(tf: RigidTransform, point: np.ndarray) -> np.ndarray:
    return tf.rotation @ np.asarray(point, dtype=float) + tf.translation


@dataclass
class CameraIntrinsics:
    """Pinhole model. u runs along image width, v along height."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0.0 < self.cx < self.width) or not (0.0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def from_fov(cls, width: int, height: int, hfov_deg: float, vfov_deg: float):
        """Build intrinsics from full horizontal/vertical fields of view."""
        if not (0.0 < hfov_deg < 180.0) or not (0.0 < vfov_deg < 180.0):
            raise ValueError("fields of view must lie in (0, 180) degrees")
        fx = (width / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
        fy = (height / 2.0) / math.tan(math.radians(vfov_deg) / 2.0)
        return cls(fx=fx, fy=fy, cx=width / 2.0, cy=height / 2.0,
                   width=int(width), height=int(height))

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


def pixel_to_ray(intr: CameraIntrinsics, u: float, v: float) -> np.ndarray:
    """Unit-depth ray (x, y, 1) in camera coordinates for pixel (u, v)."""
    return np.array([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0])


def project_ray(intr: CameraIntrinsics, p_cam: np.ndarray):
    """Project a camera-frame point to pixel coordinates.

    Returns (u, v) or None when the point is on or behind the image plane.
    """
    z = float(p_cam[2])
    if z <= 1e-9:
        return None
    return (
        intr.fx * float(p_cam[0]) / z + intr.cx,
        intr.fy * float(p_cam[1]) / z + intr.cy,
    )
