"""Graph-based superpixel segmentation.

Pixels are nodes of an 8-adjacency graph with Lab-distance edge weights.
Components merge greedily in weight order while the joining edge is no
heavier than each side's internal tolerance k/|C|, then undersized regions
are absorbed along the same edge order. Region ids are dense and numbered
by first appearance in row-major scan, which makes the output deterministic
down to the last pixel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import image_io


@dataclass(frozen=True)
class RegionMap:
    """Dense superpixel labeling plus per-region stats."""

    labels: np.ndarray  # int32 (H, W), ids 0..count-1
    count: int
    sizes: np.ndarray  # int64 (count,)
    mean_color: np.ndarray  # float64 (count, 3), Lab


def _grid_edges(lab: np.ndarray):
    """8-adjacency edges in canonical order: E, S, SE, SW blocks, each
    enumerated row-major. Returns (u, v, weight) flat-index arrays."""
    h, w = lab.shape[:2]
    idx = np.arange(h * w).reshape(h, w)
    us, vs, ws = [], [], []
    for dx, dy in ((1, 0), (0, 1), (1, 1), (-1, 1)):
        ys0, ys1 = max(0, -dy), min(h, h - dy)
        xs0, xs1 = max(0, -dx), min(w, w - dx)
        a = idx[ys0:ys1, xs0:xs1]
        b = idx[ys0 + dy : ys1 + dy, xs0 + dx : xs1 + dx]
        d = np.sqrt(
            ((lab[ys0:ys1, xs0:xs1] - lab[ys0 + dy : ys1 + dy, xs0 + dx : xs1 + dx]) ** 2).sum(
                axis=2
            )
        )
        us.append(a.ravel())
        vs.append(b.ravel())
        ws.append(d.ravel())
    return np.concatenate(us), np.concatenate(vs), np.concatenate(ws)


@njit(cache=True)
def _fh_merge(order, eu, ev, ew, n, k, min_size):
    parent = np.arange(n)
    size = np.ones(n, np.int64)
    tol = np.full(n, k)  # k / |C| with |C| = 1

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            nxt = parent[x]
            parent[x] = root
            x = nxt
        return root

    for i in range(len(order)):
        e = order[i]
        a = find(eu[e])
        b = find(ev[e])
        if a == b:
            continue
        wgt = ew[e]
        if wgt <= tol[a] and wgt <= tol[b]:
            root = a if a < b else b  # smaller root index survives
            child = b if a < b else a
            parent[child] = root
            size[root] = size[a] + size[b]
            tol[root] = wgt + k / size[root]

    if min_size > 1:
        for i in range(len(order)):
            e = order[i]
            a = find(eu[e])
            b = find(ev[e])
            if a == b:
                continue
            if size[a] < min_size or size[b] < min_size:
                root = a if a < b else b
                child = b if a < b else a
                parent[child] = root
                size[root] = size[a] + size[b]

    out = np.empty(n, np.int64)
    for i in range(n):
        out[i] = find(i)
    return out


def segment_superpixels(
    lab: np.ndarray, k: float = 300.0, min_size: int | None = None
) -> RegionMap:
    """Partition a Lab image into contrast-bounded regions.

    ``k`` trades region size against color tolerance; ``min_size`` (pixels)
    defaults to 0.02% of the image area, floor 1. Every pixel gets exactly
    one region id and each region is 8-connected.
    """
    lab = np.asarray(lab, dtype=np.float64)
    if lab.ndim != 3:
        raise ValueError("expected a (H, W, C) Lab image")
    if k <= 0:
        raise ValueError("k must be positive")
    h, w = lab.shape[:2]
    n = h * w
    if min_size is None:
        min_size = max(1, round(2e-4 * n))
    if min_size < 1:
        raise ValueError("min_size must be >= 1")

    eu, ev, ew = _grid_edges(lab)
    order = np.argsort(ew, kind="stable")  # ties keep canonical edge order
    roots = _fh_merge(order, eu, ev, ew, n, float(k), int(min_size))

    # dense ids in row-major first-appearance order
    uniq, inv = np.unique(roots, return_inverse=True)
    first = np.full(len(uniq), n, dtype=np.int64)
    np.minimum.at(first, inv, np.arange(n))
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(uniq))
    ids = rank[inv]

    count = len(uniq)
    sizes = np.bincount(ids, minlength=count).astype(np.int64)
    mean = np.empty((count, 3))
    flat = lab.reshape(n, 3)
    for c in range(3):
        mean[:, c] = np.bincount(ids, weights=flat[:, c], minlength=count) / sizes
    return RegionMap(
        labels=ids.reshape(h, w).astype(np.int32),
        count=count,
        sizes=sizes,
        mean_color=mean,
    )


def region_debug_image(regions: RegionMap) -> np.ndarray:
    """Color each region for visual inspection (uint8 RGB)."""
    pal = image_io.label_palette(max(256, regions.count + 1))
    return pal[regions.labels % len(pal)]
