"""JIT backend: the same kernels as _numpy_impl, compiled with numba.

rasterize_capsules and label_components are scalar re-statements of the
vectorized versions (same arithmetic, same comparisons) and must stay in
lockstep with them. step_body compiles the exact function the fallback runs.
"""

import math

import numpy as np
from numba import njit

from . import _core

__all__ = ["rasterize_capsules", "label_components", "step_body"]

step_body = njit(cache=True)(_core.step_body)


@njit(cache=True)
def _rasterize_kernel(segs, height, width):
    img = np.zeros((height, width), dtype=np.uint8)
    for i in range(segs.shape[0]):
        u0 = segs[i, 0]
        v0 = segs[i, 1]
        u1 = segs[i, 2]
        v1 = segs[i, 3]
        r0 = segs[i, 4]
        r1 = segs[i, 5]
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
        du = u1 - u0
        dv = v1 - v0
        seg_len2 = du * du + dv * dv
        for pv in range(va, vb + 1):
            wy = pv - v0
            for pu in range(ua, ub + 1):
                wx = pu - u0
                if seg_len2 > 1e-12:
                    t = (wx * du + wy * dv) / seg_len2
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                else:
                    t = 0.0
                ex = wx - t * du
                ey = wy - t * dv
                rr = r0 + t * (r1 - r0)
                if ex * ex + ey * ey <= rr * rr:
                    img[pv, pu] = 1
    return img


def rasterize_capsules(segs: np.ndarray, height: int, width: int) -> np.ndarray:
    return _rasterize_kernel(np.ascontiguousarray(segs, dtype=np.float64), height, width)


@njit(cache=True)
def _find_root(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        up = parent[x]
        parent[x] = root
        x = up
    return root


@njit(cache=True)
def _label_kernel(mask):
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    parent = np.zeros(h * w // 2 + 2, dtype=np.int32)
    nprov = 0
    for v in range(h):
        for u in range(w):
            if mask[v, u] == 0:
                continue
            # previously scanned 8-neighbors: W, NW, N, NE
            ra = 0
            rb = 0
            rc = 0
            rd = 0
            if u > 0 and labels[v, u - 1] > 0:
                ra = _find_root(parent, labels[v, u - 1])
            if v > 0:
                if u > 0 and labels[v - 1, u - 1] > 0:
                    rb = _find_root(parent, labels[v - 1, u - 1])
                if labels[v - 1, u] > 0:
                    rc = _find_root(parent, labels[v - 1, u])
                if u + 1 < w and labels[v - 1, u + 1] > 0:
                    rd = _find_root(parent, labels[v - 1, u + 1])
            tgt = ra
            if rb != 0 and (tgt == 0 or rb < tgt):
                tgt = rb
            if rc != 0 and (tgt == 0 or rc < tgt):
                tgt = rc
            if rd != 0 and (tgt == 0 or rd < tgt):
                tgt = rd
            if tgt == 0:
                nprov += 1
                parent[nprov] = nprov
                labels[v, u] = nprov
            else:
                labels[v, u] = tgt
                if ra != 0 and ra != tgt:
                    parent[ra] = tgt
                if rb != 0 and rb != tgt:
                    parent[rb] = tgt
                if rc != 0 and rc != tgt:
                    parent[rc] = tgt
                if rd != 0 and rd != tgt:
                    parent[rd] = tgt
    # second pass: compact ids in order of first appearance (row-major)
    remap = np.zeros(nprov + 1, dtype=np.int32)
    count = 0
    for v in range(h):
        for u in range(w):
            lab = labels[v, u]
            if lab == 0:
                continue
            root = _find_root(parent, lab)
            if remap[root] == 0:
                count += 1
                remap[root] = count
            labels[v, u] = remap[root]
    return labels, count


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    labels, count = _label_kernel(np.ascontiguousarray(mask, dtype=np.uint8))
    return labels, int(count)
