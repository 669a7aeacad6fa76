"""Dense optical flow and the motion-based parameter estimator.

Flow is classic pyramidal Horn-Schunck on the L channel: quadratic data and
smoothness terms solved by Jacobi fixed-point iterations at each pyramid
level, with the coarser level's field upsampled as a warm start and the
second frame warped once per level. Everything here is deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegeneratePoints
from .imgcore import median_filter_labels, pca_orientation, wrap_angle
from .model import NodeParams, PosedModel, RelationalModel

# weighted 8-neighbor average used by the fixed-point update
_AVG = np.array(
    [
        [1 / 12, 1 / 6, 1 / 12],
        [1 / 6, 0.0, 1 / 6],
        [1 / 12, 1 / 6, 1 / 12],
    ]
)
_KX = np.array([[-1.0, 1.0], [-1.0, 1.0]]) * 0.25
_KY = np.array([[-1.0, -1.0], [1.0, 1.0]]) * 0.25
_KT = np.ones((2, 2)) * 0.25


def _conv(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # correlate, not convolve: the derivative stencils are written unflipped
    return ndimage.correlate(img, kernel, mode="nearest")


def _warp(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    yy, xx = np.indices(img.shape, dtype=np.float64)
    return ndimage.map_coordinates(img, [yy + v, xx + u], order=1, mode="nearest")


def _hs_increment(a, b_warped, alpha, iterations):
    fx = _conv(a, _KX) + _conv(b_warped, _KX)
    fy = _conv(a, _KY) + _conv(b_warped, _KY)
    ft = _conv(b_warped, _KT) - _conv(a, _KT)
    denom = alpha**2 + fx**2 + fy**2
    du = np.zeros_like(a)
    dv = np.zeros_like(a)
    for _ in range(iterations):
        ua = _conv(du, _AVG)
        va = _conv(dv, _AVG)
        common = (fx * ua + fy * va + ft) / denom
        du = ua - fx * common
        dv = va - fy * common
    return du, dv


def dense_flow(
    lab_a: np.ndarray,
    lab_b: np.ndarray,
    levels: int = 3,
    iterations: int = 100,
    alpha: float = 15.0,
) -> np.ndarray:
    """Dense displacement field from frame a to frame b, (H, W, 2) of (dx, dy).

    Works on the raw L channel (0..100); the default alpha is tuned for that
    range. The pyramid halves resolution per level (Gaussian prefilter,
    sigma 1) and is capped so the coarsest level keeps at least 8 px on the
    short side.
    """
    if lab_a.shape != lab_b.shape:
        raise ValueError("frames differ in shape")
    a = np.ascontiguousarray(lab_a[..., 0], dtype=np.float64)
    b = np.ascontiguousarray(lab_b[..., 0], dtype=np.float64)
    h, w = a.shape
    cap = max(1, int(np.log2(max(1, min(h, w) // 8))) + 1)
    levels = max(1, min(levels, cap))
    pyr_a, pyr_b = [a], [b]
    for _ in range(levels - 1):
        pyr_a.append(ndimage.gaussian_filter(pyr_a[-1], 1.0, mode="nearest")[::2, ::2])
        pyr_b.append(ndimage.gaussian_filter(pyr_b[-1], 1.0, mode="nearest")[::2, ::2])
    u = np.zeros_like(pyr_a[-1])
    v = np.zeros_like(pyr_a[-1])
    for level in range(levels - 1, -1, -1):
        al, bl = pyr_a[level], pyr_b[level]
        if u.shape != al.shape:
            zoom = (al.shape[0] / u.shape[0], al.shape[1] / u.shape[1])
            u = ndimage.zoom(u, zoom, order=1) * 2.0
            v = ndimage.zoom(v, zoom, order=1) * 2.0
        bw = _warp(bl, u, v)
        du, dv = _hs_increment(al, bw, alpha, iterations)
        u = u + du
        v = v + dv
    return np.stack([u, v], axis=-1)


def propagate_labels(labels: np.ndarray, flow: np.ndarray, radius: int = 2) -> np.ndarray:
    """Push a label image forward along the flow.

    Each pixel splats its label at round(p + flow(p)); collisions keep the
    larger displacement, then the smaller source index. Unsplatted pixels
    with at least 6 splatted neighbors take the neighborhood majority label
    (ties to the smaller id), the remainder become background, and a modal
    label filter smooths the result.
    """
    labels = np.asarray(labels)
    h, w = labels.shape
    u = flow[..., 0]
    v = flow[..., 1]
    ys, xs = np.indices((h, w))
    tx = np.rint(xs + u).astype(np.int64).ravel()
    ty = np.rint(ys + v).astype(np.int64).ravel()
    ok = (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)
    mag = np.hypot(u, v).ravel()
    src = np.nonzero(ok)[0]
    # write in (magnitude asc, source desc) order so the winner lands last
    order = np.lexsort((-src, mag[src]))
    so = src[order]
    canvas = np.full(h * w, -1, dtype=np.int64)
    canvas[ty[so] * w + tx[so]] = labels.ravel()[so]
    canvas = canvas.reshape(h, w)

    splatted = canvas >= 0
    holes = ~splatted
    if holes.any():
        kernel = np.ones((3, 3), dtype=np.int32)
        nsplat = ndimage.correlate(splatted.astype(np.int32), kernel, mode="constant", cval=0)
        fill = holes & (nsplat - splatted >= 6)  # center never counts
        if fill.any():
            best = np.full((h, w), 0, dtype=np.int32)
            winner = np.full((h, w), -1, dtype=np.int64)
            for lab in np.unique(labels):
                cnt = ndimage.correlate(
                    (canvas == lab).astype(np.int32), kernel, mode="constant", cval=0
                )
                take = fill & (cnt > best)
                winner[take] = lab
                best[take] = cnt[take]
            canvas[fill] = winner[fill]
    canvas[canvas < 0] = 0
    return median_filter_labels(canvas.astype(labels.dtype), radius)


# ---------------------------------------------------------------------------
# parameter estimation


@dataclass(frozen=True)
class NodeEstimate:
    """Search center and box half-widths for one node at the next frame.

    ``joint_world`` predicts the parent joint's image position for children
    of the root (previous joint plus the part's median displacement); None
    when the part was lost, which freezes the joint offset.
    """

    theta: float
    s_y: float
    s_x: float
    theta_bound: float
    scale_bound: float
    offset_bound: float
    median_disp: np.ndarray
    lost: bool
    joint_world: np.ndarray | None = None


@dataclass(frozen=True)
class ParamEstimate:
    nodes: dict[str, NodeEstimate]
    root_pos: np.ndarray
    root_pos_bound: np.ndarray


def _aligned_angle(frame_axis: np.ndarray, ref: np.ndarray) -> float:
    axis = frame_axis if float(frame_axis @ ref) >= 0.0 else -frame_axis
    return float(np.arctan2(axis[1], axis[0]))


def estimate_params(
    labels_t: np.ndarray,
    labels_next: np.ndarray,
    flow: np.ndarray,
    model: RelationalModel,
    prev_params: dict[str, NodeParams],
    posed_prev: PosedModel,
    *,
    theta_bound_root: float = np.radians(10.0),
    theta_bound_neck: float = np.radians(5.0),
    theta_bound_limb: float = np.radians(30.0),
    scale_bound: float = 0.02,
    beta: float = 1.5,
) -> ParamEstimate:
    """Predict the next frame's parameters from propagated labels and flow.

    Global orientation and scale targets compare the propagated raster's PCA
    against the part's native raster (axes sign-aligned to the current pose
    so a flip never masquerades as a half-turn), which re-anchors the pose to
    the measurement every frame instead of compounding on the previous
    parameters. The root position and per-joint offsets come from median
    flow displacements. Estimates are clamped to their own bounds around the
    current parameters, and a part that lost its pixels keeps its parameters
    with a doubled angle bound.
    """
    schema = model.schema
    root = model.root
    limb_parts = {p for chain in schema.limbs.values() for p in chain}

    global_target: dict[str, float] = {}
    scale_target: dict[str, tuple[float, float]] = {}
    medians: dict[str, np.ndarray] = {}
    lost: dict[str, bool] = {}
    for name in model.order():
        node = model.nodes[name]
        prev = prev_params[name]
        lab = schema.labels[name]
        prev_angle = posed_prev[name].angle
        ys_t, xs_t = np.nonzero(labels_t == lab)
        ys_n, xs_n = np.nonzero(labels_next == lab)
        degenerate = len(xs_t) == 0 or len(xs_n) == 0
        if not degenerate:
            try:
                or_n = pca_orientation(np.stack([xs_n, ys_n], axis=1))
                ys0, xs0 = np.nonzero(node.cloud.membership >= 0.5)
                or_0 = pca_orientation(np.stack([xs0, ys0], axis=1))
            except DegeneratePoints:
                degenerate = True
        if degenerate:
            global_target[name] = prev_angle
            scale_target[name] = (prev.s_y, prev.s_x)
            medians[name] = np.zeros(2)
            lost[name] = True
            continue
        # the part's pixel-cloud axis need not coincide with the model axis
        # (skeleton-derived for limbs); measure that bias on the native
        # raster and take it back out of the posed measurement
        axis_ref = np.array([np.cos(node.axis_angle), np.sin(node.axis_angle)])
        a0 = _aligned_angle(or_0.primary_axis, axis_ref)
        bias = wrap_angle(a0 - node.axis_angle)
        ref = np.array([np.cos(prev_angle + bias), np.sin(prev_angle + bias)])
        phi_n = _aligned_angle(or_n.primary_axis, ref)
        global_target[name] = wrap_angle(phi_n - bias)
        scale_target[name] = (
            or_n.primary_sd / or_0.primary_sd if or_0.primary_sd > 1e-9 else prev.s_y,
            or_n.secondary_sd / or_0.secondary_sd if or_0.secondary_sd > 1e-9 else prev.s_x,
        )
        medians[name] = np.array(
            [np.median(flow[ys_t, xs_t, 0]), np.median(flow[ys_t, xs_t, 1])]
        )
        lost[name] = False

    nodes: dict[str, NodeEstimate] = {}
    for name in model.order():
        node = model.nodes[name]
        prev = prev_params[name]
        if name == root:
            base_bound = theta_bound_root
            theta_star = wrap_angle(global_target[name])
        elif name in limb_parts:
            base_bound = theta_bound_limb
            theta_star = wrap_angle(global_target[name] - global_target[node.parent])
        else:
            base_bound = theta_bound_neck
            theta_star = wrap_angle(global_target[name] - global_target[node.parent])
        if lost[name]:
            nodes[name] = NodeEstimate(
                theta=prev.theta,
                s_y=prev.s_y,
                s_x=prev.s_x,
                theta_bound=2.0 * base_bound,
                scale_bound=scale_bound,
                offset_bound=0.0,
                median_disp=medians[name],
                lost=True,
            )
            continue
        dtheta = np.clip(wrap_angle(theta_star - prev.theta), -base_bound, base_bound)
        ty_s, tx_s = scale_target[name]
        s_y = float(np.clip(ty_s, prev.s_y - scale_bound, prev.s_y + scale_bound))
        s_x = float(np.clip(tx_s, prev.s_x - scale_bound, prev.s_x + scale_bound))
        if node.parent == root:
            offset_bound = beta * float(np.hypot(*medians[name]))
            joint_world = posed_prev[name].joint + medians[name]
        else:
            offset_bound = 0.0
            joint_world = None
        nodes[name] = NodeEstimate(
            theta=wrap_angle(prev.theta + dtheta),
            s_y=s_y,
            s_x=s_x,
            theta_bound=base_bound,
            scale_bound=scale_bound,
            offset_bound=offset_bound,
            median_disp=medians[name],
            lost=False,
            joint_world=joint_world,
        )

    root_med = medians[root]
    root_prev = posed_prev[root].centroid
    return ParamEstimate(
        nodes=nodes,
        root_pos=root_prev + root_med,
        root_pos_bound=beta * np.abs(root_med),
    )
