"""Synthetic down-camera: render, corrupt, segment.

The "camera" produces binary segmentation maps directly (the real
perception stack's output), skipping photometry entirely. A caveline
segment projects to a capsule: each endpoint gets a radius from the
line's physical width over its depth, and the rasterizer sweeps a
circular brush between them.

The camera shares the body frame: boresight along body z (down when
level), image u along body x (forward), image v along body y
(starboard). The optical center sits at the body origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import accel
from .geometry import CameraIntrinsics, euler_to_rotation
from .world import CavelinePath

NEAR_CLIP = 0.05  # meters
MIN_RADIUS_PX = 0.5
DEFAULT_MIN_AREA_PX = 5


@dataclass
class CameraConfig:
    """Scenario-side camera bundle: intrinsics inputs plus hull masking."""

    width: int = 480
    height: int = 384
    hfov_deg: float = 80.0
    vfov_deg: float = 64.0
    # columns [0, aft_occlusion_px) look back at the vehicle's own hull
    # rather than the floor. Masking them biases contour centroids
    # toward the forward half of the image, which turns centroid
    # steering into a pure-pursuit law instead of a dead zero on
    # straight runs.
    aft_occlusion_px: int = 0

    def __post_init__(self):
        if self.aft_occlusion_px < 0 or self.aft_occlusion_px >= self.width:
            raise ValueError("aft_occlusion_px must lie in [0, width)")

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics.from_fov(self.width, self.height,
                                         self.hfov_deg, self.vfov_deg)


@dataclass
class SegmentationMap:
    """Binary mask (height, width) uint8, 1 = caveline."""

    pixels: np.ndarray
    visible_length_m: float = 0.0  # physical line length inside the frame

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def any_foreground(self) -> bool:
        return bool(self.pixels.any())


@dataclass
class Contour:
    """One 8-connected component; pixel rows in row-major order."""

    label: int
    area: int
    centroid_u: float
    centroid_v: float
    pixel_rows: np.ndarray  # (n, 2) int array of (v, u)

    @property
    def centroid(self) -> tuple:
        return (self.centroid_u, self.centroid_v)


@dataclass
class NoiseModel:
    """Perception degradation, applied dropout -> gaps -> speckle."""

    dropout_prob: float = 0.0    # per set pixel
    gap_rate: float = 0.0        # expected gaps per meter of projected line
    gap_length_px: int = 8
    speckle_rate: float = 0.0    # expected false blobs per frame
    speckle_area_px: int = 9

    def __post_init__(self):
        if not (0.0 <= self.dropout_prob <= 1.0):
            raise ValueError("dropout_prob must lie in [0, 1]")
        if self.gap_rate < 0.0 or self.speckle_rate < 0.0:
            raise ValueError("rates must be >= 0")
        if self.gap_length_px < 1 or self.speckle_area_px < 1:
            raise ValueError("gap_length_px and speckle_area_px must be >= 1")

    def is_clean(self) -> bool:
        return (self.dropout_prob == 0.0 and self.gap_rate == 0.0
                and self.speckle_rate == 0.0)


def _clip_segment_near(a: np.ndarray, b: np.ndarray):
    """Clip a camera-frame segment to z > NEAR_CLIP, or None if gone."""
    za, zb = float(a[2]), float(b[2])
    if za <= NEAR_CLIP and zb <= NEAR_CLIP:
        return None
    if za <= NEAR_CLIP:
        a = a + ((NEAR_CLIP - za) / (zb - za)) * (b - a)
    elif zb <= NEAR_CLIP:
        b = b + ((NEAR_CLIP - zb) / (za - zb)) * (a - b)
    return a, b


def project_path_segments(path: CavelinePath, position, attitude,
                          K: CameraIntrinsics):
    """Project the caveline into the image plane.

    Returns (segs, visible_length_m): segs is an (m, 6) float array of
    [u0, v0, u1, v1, r0, r1] capsule rows; visible_length_m is the 3D
    length of line whose projection lands inside the frame.
    """
    R = euler_to_rotation(attitude)  # body->world; camera axes = body axes
    p = np.asarray(position, dtype=float).reshape(3)
    half_width = path.line_width / 2.0
    rows = []
    visible = 0.0
    for a_w, b_w in path.segments():
        a = R.T @ (a_w - p)
        b = R.T @ (b_w - p)
        clipped = _clip_segment_near(a, b)
        if clipped is None:
            continue
        a, b = clipped
        za, zb = float(a[2]), float(b[2])
        u0 = K.fx * float(a[0]) / za + K.cx
        v0 = K.fy * float(a[1]) / za + K.cy
        u1 = K.fx * float(b[0]) / zb + K.cx
        v1 = K.fy * float(b[1]) / zb + K.cy
        r0 = max(MIN_RADIUS_PX, K.fx * half_width / za)
        r1 = max(MIN_RADIUS_PX, K.fx * half_width / zb)
        rows.append((u0, v0, u1, v1, r0, r1))
        rmax = max(r0, r1)
        if (max(u0, u1) >= -rmax and min(u0, u1) < K.width + rmax
                and max(v0, v1) >= -rmax and min(v0, v1) < K.height + rmax):
            visible += float(np.linalg.norm(b - a))
    if not rows:
        return np.zeros((0, 6)), 0.0
    return np.asarray(rows, dtype=float), visible


def render_downcam(state, path: CavelinePath, K: CameraIntrinsics) -> SegmentationMap:
    """Ideal (noise-free) segmentation of the caveline from the camera
    pose implied by the vehicle state."""
    segs, visible = project_path_segments(path, state.position, state.attitude, K)
    if segs.shape[0] == 0:
        mask = np.zeros((K.height, K.width), dtype=np.uint8)
    else:
        mask = accel.rasterize_capsules(segs, K.height, K.width)
    return SegmentationMap(pixels=mask, visible_length_m=visible)


def apply_hull_occlusion(segmap: SegmentationMap, aft_occlusion_px: int) -> SegmentationMap:
    """Zero the aft-most columns (the camera sees the hull there)."""
    if aft_occlusion_px <= 0:
        return segmap
    mask = segmap.pixels.copy()
    mask[:, :aft_occlusion_px] = 0
    return SegmentationMap(pixels=mask, visible_length_m=segmap.visible_length_m)


def _paint_disc(mask: np.ndarray, cv: float, cu: float, radius: float, value: int):
    h, w = mask.shape
    v0 = max(0, int(math.floor(cv - radius)))
    v1 = min(h, int(math.ceil(cv + radius)) + 1)
    u0 = max(0, int(math.floor(cu - radius)))
    u1 = min(w, int(math.ceil(cu + radius)) + 1)
    if v0 >= v1 or u0 >= u1:
        return
    vv, uu = np.mgrid[v0:v1, u0:u1]
    hit = (vv - cv) ** 2 + (uu - cu) ** 2 <= radius * radius
    mask[v0:v1, u0:u1][hit] = value


def corrupt(segmap: SegmentationMap, noise: NoiseModel,
            rng: np.random.Generator) -> SegmentationMap:
    """Apply the noise model. Draw order is fixed: dropout, gaps, speckle."""
    mask = segmap.pixels.copy()
    if noise.dropout_prob > 0.0:
        fg = np.argwhere(mask)
        if fg.shape[0] > 0:
            drop = rng.random(fg.shape[0]) < noise.dropout_prob
            mask[fg[drop, 0], fg[drop, 1]] = 0
    if noise.gap_rate > 0.0 and segmap.visible_length_m > 0.0:
        n_gaps = int(rng.poisson(noise.gap_rate * segmap.visible_length_m))
        for _ in range(n_gaps):
            fg = np.argwhere(mask)
            if fg.shape[0] == 0:
                break
            idx = int(rng.integers(fg.shape[0]))
            _paint_disc(mask, float(fg[idx, 0]), float(fg[idx, 1]),
                        noise.gap_length_px / 2.0, 0)
    if noise.speckle_rate > 0.0:
        n_spk = int(rng.poisson(noise.speckle_rate))
        radius = math.sqrt(noise.speckle_area_px / math.pi)
        for _ in range(n_spk):
            cv = rng.uniform(0.0, mask.shape[0])
            cu = rng.uniform(0.0, mask.shape[1])
            _paint_disc(mask, cv, cu, radius, 1)
    return SegmentationMap(pixels=mask, visible_length_m=segmap.visible_length_m)


def extract_contours(segmap: SegmentationMap,
                     min_area_px: int = DEFAULT_MIN_AREA_PX) -> list:
    """8-connected components at least min_area_px big, ordered by
    their first pixel in row-major scan order."""
    if min_area_px < 1:
        raise ValueError("min_area_px must be >= 1")
    labels, count = accel.label_components(segmap.pixels)
    if count == 0:
        return []
    # work on foreground pixels only; the image is mostly background
    vs, us = np.nonzero(labels)
    labs = labels[vs, us]
    areas = np.bincount(labs, minlength=count + 1)
    sum_u = np.bincount(labs, weights=us, minlength=count + 1)
    sum_v = np.bincount(labs, weights=vs, minlength=count + 1)
    order = np.argsort(labs, kind="stable")  # keeps row-major order per label
    pix = np.stack([vs[order], us[order]], axis=1)
    out = []
    pos = 0
    for lab in range(1, count + 1):
        area = int(areas[lab])
        nxt = pos + area
        if area >= min_area_px:
            out.append(Contour(
                label=lab,
                area=area,
                centroid_u=float(sum_u[lab] / area),
                centroid_v=float(sum_v[lab] / area),
                pixel_rows=pix[pos:nxt],
            ))
        pos = nxt
    return out


def write_pgm(mask: np.ndarray, path) -> None:
    """Binary PGM (P5) with foreground as 255."""
    h, w = mask.shape
    data = (np.asarray(mask, dtype=np.uint8) * 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())
