"""Pixel-level primitives shared by every stage of the pipeline.

Conventions used throughout the package:

- rasters are numpy arrays indexed ``[row, col]``, i.e. ``[y, x]``;
- point coordinates are ``(x, y)`` pairs with y growing downward;
- adjacency is 8-connectivity unless stated otherwise;
- pixels outside the raster count as background.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegeneratePoints, EmptyMask, LabelAbsent

EIGHT_NEIGHBORS = tuple(
    (dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dx, dy) != (0, 0)
)

_BOX3 = np.ones((3, 3), dtype=bool)

# sRGB (D65 white) linear transform and Lab constants.
_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE = np.array([0.95047, 1.0, 1.08883])
_LAB_DELTA = 6.0 / 29.0


def to_lab(rgb: np.ndarray) -> np.ndarray:
    """Convert an 8-bit sRGB image (H, W, 3) to CIE Lab, float64.

    Uses the D65 reference white. L lands in [0, 100]; a and b are signed.
    """
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got shape {rgb.shape}")
    srgb = rgb.astype(np.float64) / 255.0
    lin = np.where(srgb <= 0.04045, srgb / 12.92, ((srgb + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _RGB2XYZ.T
    t = xyz / _WHITE
    f = np.where(t > _LAB_DELTA**3, np.cbrt(t), t / (3 * _LAB_DELTA**2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def gradient_magnitude(lab: np.ndarray) -> np.ndarray:
    """Per-pixel max Euclidean Lab distance to the 8 neighbors.

    Border pixels only see their in-raster neighbors. A constant image maps
    to all zeros.
    """
    lab = np.asarray(lab, dtype=np.float64)
    if lab.ndim != 3:
        raise ValueError("expected a (H, W, C) Lab image")
    h, w = lab.shape[:2]
    out = np.zeros((h, w))
    for dx, dy in EIGHT_NEIGHBORS:
        ys0, ys1 = max(0, -dy), min(h, h - dy)
        xs0, xs1 = max(0, -dx), min(w, w - dx)
        if ys0 >= ys1 or xs0 >= xs1:
            continue
        a = lab[ys0:ys1, xs0:xs1]
        b = lab[ys0 + dy : ys1 + dy, xs0 + dx : xs1 + dx]
        d = np.sqrt(((a - b) ** 2).sum(axis=2))
        np.maximum(out[ys0:ys1, xs0:xs1], d, out=out[ys0:ys1, xs0:xs1])
    return out


@dataclass(frozen=True)
class DistanceMap:
    """Signed exact Euclidean distance to a part's border pixel set.

    ``signed`` is negative strictly inside the part, zero exactly on the
    border set, positive outside. ``squared`` keeps the exact integer squared
    distances so equality checks against a brute-force scan are bit-safe.
    """

    label: int
    signed: np.ndarray
    squared: np.ndarray

    @property
    def mask(self) -> np.ndarray:
        """The part's pixels (border + interior), recovered from the sign."""
        return self.signed <= 0.0


def part_border(mask: np.ndarray) -> np.ndarray:
    """Pixels of ``mask`` with an 8-neighbor outside it.

    The raster edge counts as outside, so a part touching the frame boundary
    has border pixels there too.
    """
    mask = np.asarray(mask, dtype=bool)
    eroded = ndimage.binary_erosion(mask, structure=_BOX3, border_value=0)
    return mask & ~eroded


def signed_edt(labels: np.ndarray, label: int) -> DistanceMap:
    """Signed exact Euclidean distance transform for one label.

    Distances are measured to the border pixel set of ``labels == label``.
    Raises LabelAbsent if the label never occurs.
    """
    labels = np.asarray(labels)
    mask = labels == label
    if not mask.any():
        raise LabelAbsent(f"label {label} not present in the label image")
    border = part_border(mask)
    # nearest border pixel per pixel; keeping indices keeps distances integral
    iy, ix = ndimage.distance_transform_edt(
        ~border, return_distances=False, return_indices=True
    )
    yy, xx = np.indices(mask.shape)
    sq = (yy.astype(np.int64) - iy) ** 2 + (xx.astype(np.int64) - ix) ** 2
    signed = np.sqrt(sq.astype(np.float64))
    signed[mask & ~border] *= -1.0
    return DistanceMap(label=int(label), signed=signed, squared=sq)


@dataclass(frozen=True)
class OrientationFrame:
    """Centroid plus principal axes of a 2D point set.

    ``primary_axis`` is the unit eigenvector of the larger covariance
    eigenvalue, sign-fixed so its y component is <= 0 (x >= 0 breaks the
    horizontal tie). ``secondary_axis`` is the primary rotated by +90 deg,
    i.e. (-py, px). Spreads are standard deviations along each axis.
    """

    centroid: np.ndarray
    primary_axis: np.ndarray
    secondary_axis: np.ndarray
    primary_sd: float
    secondary_sd: float

    @property
    def angle(self) -> float:
        """Primary axis direction, atan2(py, px), radians."""
        return float(np.arctan2(self.primary_axis[1], self.primary_axis[0]))


def pca_orientation(points: np.ndarray) -> OrientationFrame:
    """Principal axes of an (N, 2) array of (x, y) coordinates.

    Raises DegeneratePoints when fewer than two distinct points are given.
    The covariance is the biased (1/N) estimate.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"expected (N, 2) points, got shape {pts.shape}")
    if len(pts) < 2 or (pts == pts[0]).all():
        raise DegeneratePoints("need at least two distinct points")
    centroid = pts.mean(axis=0)
    d = pts - centroid
    cov = d.T @ d / len(pts)
    vals, vecs = np.linalg.eigh(cov)  # ascending eigenvalues
    primary = vecs[:, 1].copy()
    if primary[1] > 0 or (primary[1] == 0 and primary[0] < 0):
        primary = -primary
    secondary = np.array([-primary[1], primary[0]])
    vals = np.maximum(vals, 0.0)
    return OrientationFrame(
        centroid=centroid,
        primary_axis=primary,
        secondary_axis=secondary,
        primary_sd=float(np.sqrt(vals[1])),
        secondary_sd=float(np.sqrt(vals[0])),
    )


def _zs_neighbors(img: np.ndarray):
    # P2..P9 around the inner window, N NE E SE S SW W NW
    p2 = img[:-2, 1:-1]
    p3 = img[:-2, 2:]
    p4 = img[1:-1, 2:]
    p5 = img[2:, 2:]
    p6 = img[2:, 1:-1]
    p7 = img[2:, :-2]
    p8 = img[1:-1, :-2]
    p9 = img[:-2, :-2]
    return p2, p3, p4, p5, p6, p7, p8, p9


def morph_skeleton(mask: np.ndarray) -> np.ndarray:
    """Topological thinning of a binary mask (Zhang-Suen).

    Returns the skeleton pixels as an (N, 2) int array of (x, y), row-major
    order. The skeleton is a subset of the mask, preserves 8-connectivity of
    each component, and is idempotent-thin (no pixel deletable by another
    pass). Raises EmptyMask for an all-false input.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMask("cannot skeletonize an empty mask")
    img = np.pad(mask, 1).astype(np.uint8)
    while True:
        deleted = 0
        for step in (0, 1):
            p2, p3, p4, p5, p6, p7, p8, p9 = _zs_neighbors(img)
            ring = (p2, p3, p4, p5, p6, p7, p8, p9, p2)
            b = sum(p.astype(np.int32) for p in ring[:-1])
            a = sum(((ring[i] == 0) & (ring[i + 1] == 1)) for i in range(8))
            cond = (img[1:-1, 1:-1] == 1) & (b >= 2) & (b <= 6) & (a == 1)
            if step == 0:
                cond &= (p2 * p4 * p6 == 0) & (p4 * p6 * p8 == 0)
            else:
                cond &= (p2 * p4 * p8 == 0) & (p2 * p6 * p8 == 0)
            img[1:-1, 1:-1][cond] = 0
            deleted += int(cond.sum())
        if deleted == 0:
            break
    ys, xs = np.nonzero(img[1:-1, 1:-1])
    return np.stack([xs, ys], axis=1).astype(np.int64)


def median_filter_labels(labels: np.ndarray, radius: int = 2) -> np.ndarray:
    """Per-pixel modal label over a (2r+1)^2 window, ties to the smaller id.

    Windows are clipped at the raster edge (out-of-raster contributes no
    votes). A constant label image is a fixed point.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    labels = np.asarray(labels)
    kernel = np.ones((2 * radius + 1, 2 * radius + 1), dtype=np.int32)
    best = np.full(labels.shape, -1, dtype=np.int32)
    out = np.zeros_like(labels)
    for lab in np.unique(labels):  # ascending, so ties keep the smaller id
        cnt = ndimage.correlate(
            (labels == lab).astype(np.int32), kernel, mode="constant", cval=0
        )
        take = cnt > best
        out[take] = lab
        best[take] = cnt[take]
    return out


def rot2(angle: float) -> np.ndarray:
    """2x2 rotation matrix for image coordinates (y down)."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = float(a)
    out = np.arctan2(np.sin(a), np.cos(a))
    if out == -np.pi:
        out = np.pi
    return float(out)
