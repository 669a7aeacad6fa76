"""Appearance scoring and the multi-scale parameter search.

Each tracked frame reduces to a handful of box-constrained maximizations:
pose a part group, delineate it on the new frame, and score the delineated
pixels against reference color histograms anchored at the init frame. The
optimizer is an axis-wise hill climb that sweeps a shrinking schedule of
step sizes inside the estimator's box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .errors import NoForegroundSeeds, OffFrame
from .flow import ParamEstimate, dense_flow, estimate_params, propagate_labels
from .imgcore import gradient_magnitude, to_lab
from .model import (
    NodeParams,
    PosedModel,
    RelationalModel,
    Skeleton2D,
    delineate,
    extract_pose,
    local_joint_offset,
    pose_model,
    project_cloud,
)
from .superpix import RegionMap, segment_superpixels

# ---------------------------------------------------------------------------
# color histograms


@dataclass(frozen=True)
class Histogram:
    """Normalized RGB histogram; ``bins`` is flat with r fastest last."""

    bins: np.ndarray
    count: int
    bins_per_channel: int = 16


def build_histogram(
    pixels: np.ndarray, frame_rgb: np.ndarray, bins_per_channel: int = 16
) -> Histogram:
    """Histogram the colors at (N, 2) pixel coordinates (x, y).

    Channel bin index is value >> (8 - log2(bins)); 16 bins per channel by
    default. An empty pixel set gives an all-zero histogram with count 0.
    """
    bpc = bins_per_channel
    if bpc < 2 or bpc > 256 or bpc & (bpc - 1):
        raise ValueError("bins_per_channel must be a power of two in [2, 256]")
    shift = 8 - int(math.log2(bpc))
    pixels = np.asarray(pixels)
    if pixels.size == 0:
        return Histogram(bins=np.zeros(bpc**3), count=0, bins_per_channel=bpc)
    colors = frame_rgb[pixels[:, 1], pixels[:, 0]].astype(np.int64) >> shift
    idx = (colors[:, 0] * bpc + colors[:, 1]) * bpc + colors[:, 2]
    counts = np.bincount(idx, minlength=bpc**3).astype(np.float64)
    return Histogram(
        bins=counts / counts.sum(), count=int(len(pixels)), bins_per_channel=bpc
    )


def chi_square(a: Histogram, b: Histogram) -> float:
    """Half chi-square distance between normalized histograms, in [0, 1].

    Zero-mass bins contribute nothing; two empty histograms compare equal
    (0), one empty against one non-empty is maximally different (1).
    """
    if a.bins_per_channel != b.bins_per_channel:
        raise ValueError("histograms use different bin counts")
    ea, eb = a.count == 0, b.count == 0
    if ea and eb:
        return 0.0
    if ea or eb:
        return 1.0
    den = a.bins + b.bins
    num = (a.bins - b.bins) ** 2
    sel = den > 0
    return float(0.5 * (num[sel] / den[sel]).sum())


def recognition_score(pixels: np.ndarray, frame_rgb: np.ndarray, ref: Histogram) -> float:
    """Similarity of a pixel set's colors to a reference histogram, in [0, 1]."""
    return 1.0 - chi_square(build_histogram(pixels, frame_rgb, ref.bins_per_channel), ref)


# ---------------------------------------------------------------------------
# multi-scale parameter search


@dataclass(frozen=True)
class SearchSpec:
    """Box ``center +- half_width`` with a shrinking step schedule."""

    center: np.ndarray
    half_width: np.ndarray
    schedule: tuple[float, ...] = (1.0, 0.5, 0.25, 0.125, 0.0625)
    budget: int = 2000

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64)
        hw = np.asarray(self.half_width, dtype=np.float64)
        if center.shape != hw.shape or center.ndim != 1:
            raise ValueError("center and half_width must be 1D and equal length")
        if (hw < 0).any():
            raise ValueError("half widths must be non-negative")
        sched = tuple(float(s) for s in self.schedule)
        if not sched or sched[0] > 1.0 or any(s <= 0 for s in sched):
            raise ValueError("schedule multipliers must lie in (0, 1]")
        if any(sched[i + 1] >= sched[i] for i in range(len(sched) - 1)):
            raise ValueError("schedule must be strictly decreasing")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_width", hw)
        object.__setattr__(self, "schedule", sched)


@dataclass(frozen=True)
class MspsResult:
    params: np.ndarray
    score: float
    evals: int
    budget_exhausted: bool


def msps_maximize(objective, spec: SearchSpec) -> MspsResult:
    """Axis-wise hill climb over a shrinking step schedule.

    At each scale, all 2*dim axis neighbors of the incumbent are evaluated
    (skipping those that clamp onto the incumbent) and the best strictly
    improving one becomes the new incumbent; a sweep without improvement
    moves to the next scale. The initial center evaluation is not counted
    against the budget.
    """
    center = spec.center.copy()
    lo = spec.center - spec.half_width
    hi = spec.center + spec.half_width
    dim = len(center)
    best = float(objective(center))
    evals = 0
    exhausted = False
    for mult in spec.schedule:
        step = spec.half_width * mult
        while not exhausted:
            best_cand = None
            best_val = best
            for i in range(dim):
                if step[i] == 0.0:
                    continue
                for sign in (1.0, -1.0):
                    xi = float(np.clip(center[i] + sign * step[i], lo[i], hi[i]))
                    if xi == center[i]:
                        continue
                    if evals >= spec.budget:
                        exhausted = True
                        break
                    cand = center.copy()
                    cand[i] = xi
                    val = float(objective(cand))
                    evals += 1
                    if val > best_val:
                        best_val = val
                        best_cand = cand
                if exhausted:
                    break
            if best_cand is None:
                break
            center = best_cand
            best = best_val
        if exhausted:
            break
    return MspsResult(params=center, score=best, evals=evals, budget_exhausted=exhausted)


# ---------------------------------------------------------------------------
# per-frame tracking


@dataclass
class FrameResult:
    """Everything the tracker knows about one frame."""

    params: dict[str, NodeParams]
    posed: PosedModel
    labels: np.ndarray
    skeleton: Skeleton2D
    scores: dict[str, float]
    limb_scores: dict[str, float]
    evals: dict[str, int]
    diverged: bool
    flow: np.ndarray | None = None


def _score_group(
    model: RelationalModel,
    params: dict[str, NodeParams],
    group: tuple[str, ...],
    frame_rgb: np.ndarray,
    grad: np.ndarray,
    regions: RegionMap,
    ref_hists: dict[str, Histogram],
    eta: float,
):
    """Pose, delineate and score one part group; returns (mean F, per-part F,
    delineation)."""
    posed = pose_model(model, params)
    shape = frame_rgb.shape[:2]
    projs = {name: project_cloud(model.nodes[name], posed[name], shape) for name in group}
    dl = delineate(projs, regions.labels, grad, eta)
    scores = {
        name: recognition_score(dl.masks[name], frame_rgb, ref_hists[name])
        for name in group
    }
    return float(np.mean(list(scores.values()))), scores, dl


def _group_vector(
    group: tuple[str, ...],
    est: ParamEstimate,
    model: RelationalModel,
    cfg: RunConfig,
    params: dict[str, NodeParams],
    prev_params: dict[str, NodeParams],
):
    """Search center, half widths, and vector->params mapping for one group.

    Called once the group's ancestors already carry their winning parameters,
    so the proximal joint-offset center can be expressed in the parent's
    final local frame.
    """
    root = model.root
    scale_hw = cfg.scale_bound
    if group == (root,):
        ne = est.nodes[root]
        center = np.array([est.root_pos[0], est.root_pos[1], ne.theta, ne.s_y, ne.s_x])
        hw = np.array(
            [est.root_pos_bound[0], est.root_pos_bound[1], ne.theta_bound, scale_hw, scale_hw]
        )

        def apply(vec, params):
            params[root] = NodeParams(
                theta=vec[2], s_y=vec[3], s_x=vec[4], tx=vec[0], ty=vec[1]
            )

        return center, hw, apply

    center_parts = []
    hw_parts = []
    for name in group:
        ne = est.nodes[name]
        center_parts += [ne.theta, ne.s_y, ne.s_x]
        hw_parts += [ne.theta_bound, scale_hw, scale_hw]
    proximal = group[0]
    ne0 = est.nodes[proximal]
    prev_off = np.array([prev_params[proximal].tx, prev_params[proximal].ty])
    if ne0.joint_world is None:
        off_center = prev_off
        off_bound = 0.0
    else:
        posed_now = pose_model(model, params)
        off_center = local_joint_offset(model, params, posed_now, proximal, ne0.joint_world)
        off_bound = ne0.offset_bound
        # sudden-motion clamp: the predicted offset may not leave the box
        # around the current one
        off_center = np.clip(off_center, prev_off - off_bound, prev_off + off_bound)
    center = np.concatenate([center_parts, off_center])
    hw = np.array(hw_parts + [off_bound, off_bound])

    def apply(vec, params):
        for i, name in enumerate(group):
            tx, ty = (vec[-2], vec[-1]) if name == proximal else (0.0, 0.0)
            params[name] = NodeParams(
                theta=vec[3 * i], s_y=vec[3 * i + 1], s_x=vec[3 * i + 2], tx=tx, ty=ty
            )

    return center, hw, apply


def _compose_labels(model, params, groups, frame_rgb, grad, regions, ref_hists, eta):
    """Final delineation of every group, composed into one frame label map.

    Later groups overwrite earlier ones where fragments overlap (root first,
    limbs last). Scores come from these final masks.
    """
    shape = frame_rgb.shape[:2]
    canvas = np.zeros(shape, dtype=np.int32)
    scores: dict[str, float] = {}
    for group in groups:
        _, part_scores, dl = _score_group(
            model, params, group, frame_rgb, grad, regions, ref_hists, eta
        )
        scores.update(part_scores)
        h, w = dl.labels.shape
        window = canvas[dl.y0 : dl.y0 + h, dl.x0 : dl.x0 + w]
        owned = dl.labels > 0
        window[owned] = dl.labels[owned]
    return canvas, scores


def _limb_means(schema, scores: dict[str, float]) -> dict[str, float]:
    return {
        limb: float(np.mean([scores[p] for p in chain]))
        for limb, chain in schema.limbs.items()
    }


def track_frame(
    model: RelationalModel,
    ref_hists: dict[str, Histogram],
    frame_t_rgb: np.ndarray,
    frame_next_rgb: np.ndarray,
    labels_t: np.ndarray,
    prev_params: dict[str, NodeParams],
    cfg: RunConfig,
) -> FrameResult:
    """Advance the pose from frame t to frame t+1.

    Order of business: dense flow, label propagation, parameter estimation,
    then group searches (root, then singles, then limbs) each maximizing the
    mean recognition score of its delineated parts. A best torso score below
    the divergence threshold freezes the previous pose for this frame. The
    returned label map is the final composed delineation at the winning
    parameters.
    """
    lab_t = to_lab(frame_t_rgb)
    lab_n = to_lab(frame_next_rgb)
    flow = dense_flow(lab_t, lab_n, cfg.flow_levels, cfg.flow_iterations, cfg.flow_alpha)
    labels_prop = propagate_labels(labels_t, flow, cfg.median_radius)
    posed_prev = pose_model(model, prev_params)
    est = estimate_params(
        labels_t,
        labels_prop,
        flow,
        model,
        prev_params,
        posed_prev,
        theta_bound_root=np.radians(cfg.theta_bound_root_deg),
        theta_bound_neck=np.radians(cfg.theta_bound_neck_deg),
        theta_bound_limb=np.radians(cfg.theta_bound_limb_deg),
        scale_bound=cfg.scale_bound,
        beta=cfg.beta,
    )
    grad = gradient_magnitude(lab_n)
    regions = segment_superpixels(lab_n, cfg.superpixel_k, cfg.superpixel_min_size)

    schema = model.schema
    groups = schema.groups()
    params = dict(prev_params)
    evals: dict[str, int] = {}
    diverged = False

    def group_name(group: tuple[str, ...]) -> str:
        for limb, chain in schema.limbs.items():
            if tuple(chain) == group:
                return limb
        return group[0]

    for gi, group in enumerate(groups):
        center, hw, apply = _group_vector(group, est, model, cfg, params, prev_params)

        def objective(vec):
            trial = dict(params)
            apply(vec, trial)
            try:
                score, _, _ = _score_group(
                    model, trial, group, frame_next_rgb, grad, regions, ref_hists, cfg.eta
                )
            except (NoForegroundSeeds, OffFrame):
                return 0.0
            return score

        res = msps_maximize(
            objective, SearchSpec(center, hw, schedule=cfg.schedule, budget=cfg.budget)
        )
        evals[group_name(group)] = res.evals
        if gi == 0 and res.score < cfg.divergence_threshold:
            diverged = True
            params = dict(prev_params)
            break
        apply(res.params, params)

    posed = pose_model(model, params)
    labels, scores = _compose_labels(
        model, params, groups, frame_next_rgb, grad, regions, ref_hists, cfg.eta
    )
    return FrameResult(
        params=params,
        posed=posed,
        labels=labels,
        skeleton=extract_pose(model, posed),
        scores=scores,
        limb_scores=_limb_means(schema, scores),
        evals=evals,
        diverged=diverged,
        flow=flow,
    )


class Tracker:
    """Stateful frame-to-frame driver around track_frame."""

    def __init__(self, model: RelationalModel, ref_hists: dict[str, Histogram], cfg: RunConfig):
        self.model = model
        self.ref_hists = ref_hists
        self.cfg = cfg
        self._frame: np.ndarray | None = None
        self._labels: np.ndarray | None = None
        self._params: dict[str, NodeParams] | None = None

    def start(self, frame_rgb: np.ndarray) -> FrameResult:
        """Delineate the init frame at the identity pose."""
        from .model import identity_params

        cfg = self.cfg
        params = identity_params(self.model)
        posed = pose_model(self.model, params)
        lab = to_lab(frame_rgb)
        grad = gradient_magnitude(lab)
        regions = segment_superpixels(lab, cfg.superpixel_k, cfg.superpixel_min_size)
        labels, scores = _compose_labels(
            self.model,
            params,
            self.model.schema.groups(),
            frame_rgb,
            grad,
            regions,
            self.ref_hists,
            cfg.eta,
        )
        self._frame = frame_rgb
        self._labels = labels
        self._params = params
        return FrameResult(
            params=params,
            posed=posed,
            labels=labels,
            skeleton=extract_pose(self.model, posed),
            scores=scores,
            limb_scores=_limb_means(self.model.schema, scores),
            evals={},
            diverged=False,
            flow=None,
        )

    def step(self, frame_next_rgb: np.ndarray) -> FrameResult:
        if self._frame is None:
            raise RuntimeError("call start() with the init frame first")
        result = track_frame(
            self.model,
            self.ref_hists,
            self._frame,
            frame_next_rgb,
            self._labels,
            self._params,
            self.cfg,
        )
        self._frame = frame_next_rgb
        self._labels = result.labels
        self._params = result.params
        return result
