"""Vectorized numpy/scipy backend.

The expressions here mirror the scalar kernels in the JIT backend operation
for operation, so both backends produce bit-identical arrays. Keep any edit
synchronized with _numba_impl.
"""

import math

import numpy as np
from scipy import ndimage

from ._core import step_body

__all__ = ["rasterize_capsules", "label_components", "step_body"]

_EIGHT_CONNECTED = np.ones((3, 3), dtype=np.uint8)


def rasterize_capsules(segs: np.ndarray, height: int, width: int) -> np.ndarray:
    """Draw 2D capsules (thick segments with round caps) into a binary map.

    segs: (n, 6) float64 rows of u0, v0, u1, v1, r0, r1 in pixel units.
    A pixel is set when its center lies within the linearly interpolated
    radius of the segment. Returns a uint8 (height, width) array of 0/1.
    """
    img = np.zeros((height, width), dtype=np.uint8)
    for i in range(segs.shape[0]):
        u0, v0, u1, v1, r0, r1 = segs[i]
        rmax = r0 if r0 > r1 else r1
        ua = int(math.floor(min(u0, u1) - rmax))
        ub = int(math.ceil(max(u0, u1) + rmax))
        va = int(math.floor(min(v0, v1) - rmax))
        vb = int(math.ceil(max(v0, v1) + rmax))
        if ua < 0:
            ua = 0
        if va < 0:
            va = 0
        if ub > width - 1:
            ub = width - 1
        if vb > height - 1:
            vb = height - 1
        if ua > ub or va > vb:
            continue
        wx = np.arange(ua, ub + 1, dtype=np.float64)[None, :] - u0
        wy = np.arange(va, vb + 1, dtype=np.float64)[:, None] - v0
        du = u1 - u0
        dv = v1 - v0
        seg_len2 = du * du + dv * dv
        if seg_len2 > 1e-12:
            t = (wx * du + wy * dv) / seg_len2
            np.clip(t, 0.0, 1.0, out=t)
        else:
            t = np.zeros((vb - va + 1, ub - ua + 1), dtype=np.float64)
        ex = wx - t * du
        ey = wy - t * dv
        rr = r0 + t * (r1 - r0)
        hit = (ex * ex + ey * ey) <= (rr * rr)
        img[va:vb + 1, ua:ub + 1] |= hit.astype(np.uint8)
    return img


def _normalize_labels(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Renumber labels 1..n in order of each component's first row-major pixel."""
    flat = labels.ravel()
    nz = np.flatnonzero(flat)
    if nz.size == 0:
        return np.zeros(labels.shape, dtype=np.int32), 0
    vals = flat[nz]
    uniq, first = np.unique(vals, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.zeros(int(uniq.max()) + 1, dtype=np.int32)
    remap[uniq[order]] = np.arange(1, uniq.size + 1, dtype=np.int32)
    return remap[flat].reshape(labels.shape), int(uniq.size)


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected component labels, numbered by first row-major pixel.

    Returns (labels int32 (H, W), component count). Background is 0.
    """
    raw, _ = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    return _normalize_labels(raw)
