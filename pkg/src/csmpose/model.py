"""Articulated fuzzy part model.

A body part is represented by a cloud: a fuzzy membership raster built from
the signed distance transform of its init-frame mask, equal to 1 on the part
core, 0 far away, and sigmoid in between. The parts hang off a tree rooted at
the torso whose edges store joint geometry in parent-local coordinates, so a
small parameter vector (angles, axis scales, root translation, shoulder/neck
offsets) poses every cloud in a new frame.

Pixel conventions follow imgcore: (x, y) points, [y, x] rasters.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import image_io
from .errors import (
    DegeneratePoints,
    DisconnectedPart,
    MissingPart,
    NoForegroundSeeds,
    OffFrame,
)
from .ift import IftConfig, SeedSet, ift_sc
from .imgcore import (
    DistanceMap,
    OrientationFrame,
    morph_skeleton,
    pca_orientation,
    rot2,
    signed_edt,
    wrap_angle,
)

# membership this close to 1 (or 0) counts as interior (exterior); projection
# resampling never distorts by more than ~1e-13 so this is a safe snap
INTERIOR_TOL = 1e-6

MODEL_FORMAT = "csmpose-model/1"

_BOX3 = np.ones((3, 3), dtype=bool)


# ---------------------------------------------------------------------------
# clouds


@dataclass(frozen=True)
class Cloud:
    """Fuzzy membership raster of one part, cropped to its support.

    ``origin`` places local pixel (0, 0) in init-frame coordinates and
    ``centroid`` is the part's pixel centroid in the same frame. Membership
    is exactly 1 where the init distance is <= gamma_n, exactly 0 where it is
    >= gamma_p, and strictly between otherwise (the uncertainty region).
    """

    label: int
    membership: np.ndarray
    origin: np.ndarray
    centroid: np.ndarray
    gamma_p: float
    gamma_n: float
    sigma: float

    @property
    def local_centroid(self) -> np.ndarray:
        return self.centroid - self.origin

    def interior(self) -> np.ndarray:
        return self.membership >= 1.0 - INTERIOR_TOL

    def exterior(self) -> np.ndarray:
        return self.membership <= INTERIOR_TOL

    def uncertainty(self) -> np.ndarray:
        m = self.membership
        return (m > INTERIOR_TOL) & (m < 1.0 - INTERIOR_TOL)


def membership_from_distance(
    signed: np.ndarray, gamma_p: float, gamma_n: float, sigma: float
) -> np.ndarray:
    """Sigmoid membership of a signed distance raster."""
    if not (gamma_n < 0.0 < gamma_p):
        raise ValueError("need gamma_n < 0 < gamma_p")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    m = np.zeros(signed.shape, dtype=np.float64)
    m[signed <= gamma_n] = 1.0
    band = (signed > gamma_n) & (signed < gamma_p)
    m[band] = 1.0 / (1.0 + np.exp(signed[band] / sigma))
    return m


def build_cloud(
    dt: DistanceMap,
    gamma_p: float = 5.0,
    gamma_n: float = -4.0,
    sigma: float = 1.5,
) -> Cloud:
    """Turn a part's signed distance map into a cropped cloud."""
    m = membership_from_distance(dt.signed, gamma_p, gamma_n, sigma)
    ys, xs = np.nonzero(dt.mask)
    centroid = np.array([xs.mean(), ys.mean()])
    sy, sx = np.nonzero(m > 0)
    h, w = m.shape
    y0, y1 = max(0, sy.min() - 1), min(h, sy.max() + 2)
    x0, x1 = max(0, sx.min() - 1), min(w, sx.max() + 2)
    return Cloud(
        label=dt.label,
        membership=m[y0:y1, x0:x1].copy(),
        origin=np.array([x0, y0], dtype=np.float64),
        centroid=centroid,
        gamma_p=float(gamma_p),
        gamma_n=float(gamma_n),
        sigma=float(sigma),
    )


# ---------------------------------------------------------------------------
# body schema and kinematic tree


@dataclass(frozen=True)
class PartSchema:
    """Names, label ids, and tree structure of the tracked parts.

    ``limbs`` lists serial chains (proximal to distal) searched and scored as
    one group; ``head`` names the part whose parent joint sits on the torso
    axis (the neck). Children are ordered by label id everywhere.
    """

    labels: dict[str, int]
    parents: dict[str, str]
    root: str
    limbs: dict[str, tuple[str, ...]]
    head: str | None = None

    def __post_init__(self):
        if self.root not in self.labels:
            raise ValueError("root part missing from labels")
        if self.root in self.parents:
            raise ValueError("root cannot have a parent")
        for child, parent in self.parents.items():
            if child not in self.labels or parent not in self.labels:
                raise ValueError(f"unknown part in edge {child}->{parent}")
        for name in self.labels:
            if name != self.root and name not in self.parents:
                raise ValueError(f"part {name} is not connected to the tree")
        ids = list(self.labels.values())
        if len(set(ids)) != len(ids):
            raise ValueError("part label ids must be unique")
        if any(i <= 0 for i in ids):
            raise ValueError("part label ids must be positive")
        limb_parts = [p for chain in self.limbs.values() for p in chain]
        if len(set(limb_parts)) != len(limb_parts):
            raise ValueError("a part may appear in at most one limb")
        for chain in self.limbs.values():
            for i, part in enumerate(chain):
                want = self.root if i == 0 else chain[i - 1]
                if self.parents.get(part) != want:
                    raise ValueError("limb chains must be serial from the root")

    def children(self, name: str) -> list[str]:
        kids = [c for c, p in self.parents.items() if p == name]
        return sorted(kids, key=lambda c: self.labels[c])

    def order(self) -> list[str]:
        """Root-first breadth-first part order (parents precede children)."""
        out = [self.root]
        queue = [self.root]
        while queue:
            cur = queue.pop(0)
            for child in self.children(cur):
                out.append(child)
                queue.append(child)
        return out

    def groups(self) -> list[tuple[str, ...]]:
        """Search groups: root alone, each non-limb part alone, then limbs."""
        limb_parts = {p for chain in self.limbs.values() for p in chain}
        singles = [
            (name,)
            for name in self.order()
            if name != self.root and name not in limb_parts
        ]
        return [(self.root,)] + singles + [tuple(c) for c in self.limbs.values()]


DEFAULT_SCHEMA = PartSchema(
    labels={
        "torso": 1,
        "head": 2,
        "left_upper_arm": 3,
        "left_forearm": 4,
        "right_upper_arm": 5,
        "right_forearm": 6,
    },
    parents={
        "head": "torso",
        "left_upper_arm": "torso",
        "left_forearm": "left_upper_arm",
        "right_upper_arm": "torso",
        "right_forearm": "right_upper_arm",
    },
    root="torso",
    limbs={
        "left_arm": ("left_upper_arm", "left_forearm"),
        "right_arm": ("right_upper_arm", "right_forearm"),
    },
    head="head",
)


@dataclass(frozen=True)
class BodyNode:
    """One part of the articulated model.

    Local frames: a node's local x axis is its primary axis, local y its
    secondary, so a world offset v maps to R(-axis_angle) @ v locally.
    ``c_vec`` is the centroid seen from the parent joint in this node's local
    frame; ``d_vec`` is the joint seen from the parent centroid in the
    parent's local frame. For the root, ``joint0 == centroid0`` and
    ``theta0`` is its global axis angle.
    """

    name: str
    label: int
    parent: str | None
    cloud: Cloud
    axis_angle: float
    joint0: np.ndarray
    c_vec: np.ndarray
    d_vec: np.ndarray
    theta0: float


@dataclass(frozen=True)
class RelationalModel:
    schema: PartSchema
    nodes: dict[str, BodyNode]

    @property
    def root(self) -> str:
        return self.schema.root

    def order(self) -> list[str]:
        return list(self.nodes)


# ---------------------------------------------------------------------------
# model construction


def _connected(mask: np.ndarray) -> bool:
    return ndimage.label(mask, structure=_BOX3)[1] == 1


def _joint_on_axis(
    coords: np.ndarray, axis: OrientationFrame, c_child: np.ndarray, c_parent: np.ndarray
) -> np.ndarray:
    """Pick the joint pixel from an uncertainty intersection.

    Prefers pixels within one pixel of the axis line, then minimizes the sum
    of distances to the two centroids. Ties resolve to the first candidate in
    row-major order.
    """
    d = coords - axis.centroid
    perp = d @ axis.secondary_axis
    on = np.abs(perp) <= 1.0
    pool = coords[on] if on.any() else coords
    score = np.linalg.norm(pool - c_child, axis=1) + np.linalg.norm(
        pool - c_parent, axis=1
    )
    return pool[int(np.argmin(score))].astype(np.float64)


def _closest_pair_midpoint(mask_a: np.ndarray, mask_b: np.ndarray) -> np.ndarray:
    """Midpoint of the closest pixel pair between two disjoint masks."""
    iy, ix = ndimage.distance_transform_edt(
        ~mask_b, return_distances=False, return_indices=True
    )
    ays, axs = np.nonzero(mask_a)
    bys, bxs = iy[ays, axs], ix[ays, axs]
    d2 = (ays - bys) ** 2 + (axs - bxs) ** 2
    i = int(np.argmin(d2))
    return np.array(
        [(axs[i] + bxs[i]) / 2.0, (ays[i] + bys[i]) / 2.0], dtype=np.float64
    )


def build_model(
    frame_rgb: np.ndarray,
    labels: np.ndarray,
    schema: PartSchema = DEFAULT_SCHEMA,
    gamma_p: float = 5.0,
    gamma_n: float = -4.0,
    sigma: float = 1.5,
) -> RelationalModel:
    """Build the articulated cloud model from one labeled frame.

    Every schema part must be present and 8-connected. Limb part orientations
    come from the limb-mask skeleton restricted to each part's cloud support;
    torso and head orientations from their raw pixels. Joints are placed
    inside uncertainty intersections (closest-pair midpoint if a pair of
    regions fails to intersect).
    """
    labels = np.asarray(labels)
    masks: dict[str, np.ndarray] = {}
    for name in schema.order():
        mask = labels == schema.labels[name]
        if not mask.any():
            raise MissingPart(f"part {name} absent from the init mask")
        if not _connected(mask):
            raise DisconnectedPart(f"part {name} is not 8-connected")
        masks[name] = mask

    dts = {name: signed_edt(labels, schema.labels[name]) for name in masks}
    clouds = {
        name: build_cloud(dts[name], gamma_p, gamma_n, sigma) for name in masks
    }
    unc = {
        name: (dts[name].signed > gamma_n) & (dts[name].signed < gamma_p)
        for name in masks
    }

    # orientations: limb parts use the thinned limb silhouette restricted to
    # their cloud support, which keeps elbows from bleeding into both parts
    orient: dict[str, OrientationFrame] = {}
    limb_parts = {p for chain in schema.limbs.values() for p in chain}
    for name in schema.order():
        if name in limb_parts:
            continue
        ys, xs = np.nonzero(masks[name])
        orient[name] = pca_orientation(np.stack([xs, ys], axis=1))
    for chain in schema.limbs.values():
        limb_mask = np.zeros(labels.shape, dtype=bool)
        for part in chain:
            limb_mask |= masks[part]
        skel = morph_skeleton(limb_mask)
        for part in chain:
            support = dts[part].signed < gamma_p
            pts = skel[support[skel[:, 1], skel[:, 0]]]
            try:
                orient[part] = pca_orientation(pts)
            except DegeneratePoints:
                ys, xs = np.nonzero(masks[part])
                orient[part] = pca_orientation(np.stack([xs, ys], axis=1))

    # anchor geometry on cloud centroids: project_cloud rotates each cloud
    # about its pixel-mean centroid, so c/d vectors must use the same point
    nodes: dict[str, BodyNode] = {}
    root = schema.root
    root_or = orient[root]
    nodes[root] = BodyNode(
        name=root,
        label=schema.labels[root],
        parent=None,
        cloud=clouds[root],
        axis_angle=root_or.angle,
        joint0=clouds[root].centroid.copy(),
        c_vec=np.zeros(2),
        d_vec=clouds[root].centroid.copy(),
        theta0=root_or.angle,
    )
    for name in schema.order():
        if name == root:
            continue
        parent = schema.parents[name]
        inter = unc[name] & unc[parent]
        c_child = clouds[name].centroid
        c_parent = clouds[parent].centroid
        if inter.any():
            ys, xs = np.nonzero(inter)
            coords = np.stack([xs, ys], axis=1).astype(np.float64)
            axis = orient[parent] if name == schema.head else orient[name]
            joint = _joint_on_axis(coords, axis, c_child, c_parent)
        else:
            # EmptyJointIntersection fallback
            joint = _closest_pair_midpoint(unc[name], unc[parent])
        phi_l = orient[name].angle
        phi_k = orient[parent].angle
        nodes[name] = BodyNode(
            name=name,
            label=schema.labels[name],
            parent=parent,
            cloud=clouds[name],
            axis_angle=phi_l,
            joint0=joint,
            c_vec=rot2(-phi_l) @ (c_child - joint),
            d_vec=rot2(-phi_k) @ (joint - c_parent),
            theta0=wrap_angle(phi_l - phi_k),
        )
    return RelationalModel(schema=schema, nodes=nodes)


# ---------------------------------------------------------------------------
# posing


@dataclass(frozen=True)
class NodeParams:
    """Pose parameters of one node.

    ``theta`` is the relative joint angle (the root's global angle for the
    root). ``s_y`` scales along the node's primary axis, ``s_x`` along the
    secondary. ``tx, ty`` hold the root centroid position for the root and a
    parent-local joint offset for direct children of the root; they must be
    zero anywhere else.
    """

    theta: float
    s_y: float = 1.0
    s_x: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    def vector(self) -> np.ndarray:
        return np.array([self.theta, self.s_y, self.s_x, self.tx, self.ty])


@dataclass(frozen=True)
class PosedNode:
    name: str
    centroid: np.ndarray
    joint: np.ndarray
    angle: float
    s_y: float
    s_x: float


@dataclass(frozen=True)
class PosedModel:
    nodes: dict[str, PosedNode]

    def __getitem__(self, name: str) -> PosedNode:
        return self.nodes[name]


def _scale_local(v: np.ndarray, s_y: float, s_x: float) -> np.ndarray:
    # local x lies along the primary axis, hence the s_y (primary) scale
    return np.array([v[0] * s_y, v[1] * s_x])


def pose_model(model: RelationalModel, params: dict[str, NodeParams]) -> PosedModel:
    """Forward kinematics: place every joint and centroid in frame coords.

    A child joint hangs off the parent centroid through the scaled, rotated
    edge vector (plus the per-frame offset for children of the root); global
    angles accumulate down the tree.
    """
    posed: dict[str, PosedNode] = {}
    root = model.root
    for name in model.order():
        node = model.nodes[name]
        p = params[name]
        if node.parent is None:
            centroid = np.array([p.tx, p.ty], dtype=np.float64)
            posed[name] = PosedNode(
                name=name,
                centroid=centroid,
                joint=centroid.copy(),
                angle=wrap_angle(p.theta),
                s_y=p.s_y,
                s_x=p.s_x,
            )
            continue
        if node.parent != root and (p.tx != 0.0 or p.ty != 0.0):
            raise ValueError(
                f"joint offsets are only allowed on children of the root, got one on {name}"
            )
        parent = posed[node.parent]
        pk = params[node.parent]
        local = _scale_local(node.d_vec, pk.s_y, pk.s_x) + np.array([p.tx, p.ty])
        joint = parent.centroid + rot2(parent.angle) @ local
        angle = wrap_angle(parent.angle + p.theta)
        centroid = joint + rot2(angle) @ _scale_local(node.c_vec, p.s_y, p.s_x)
        posed[name] = PosedNode(
            name=name, centroid=centroid, joint=joint, angle=angle, s_y=p.s_y, s_x=p.s_x
        )
    return PosedModel(nodes=posed)


def identity_params(model: RelationalModel) -> dict[str, NodeParams]:
    """Parameters that reproduce the init-frame pose exactly."""
    out: dict[str, NodeParams] = {}
    for name in model.order():
        node = model.nodes[name]
        if node.parent is None:
            c = node.joint0
            out[name] = NodeParams(theta=node.theta0, tx=float(c[0]), ty=float(c[1]))
        else:
            out[name] = NodeParams(theta=node.theta0)
    return out


def local_joint_offset(
    model: RelationalModel,
    params: dict[str, NodeParams],
    posed: PosedModel,
    child: str,
    joint_world: np.ndarray,
) -> np.ndarray:
    """Offset (tx, ty) that places ``child``'s parent joint at ``joint_world``
    given the parent's current pose."""
    node = model.nodes[child]
    parent = posed[node.parent]
    pk = params[node.parent]
    local = rot2(-parent.angle) @ (np.asarray(joint_world, dtype=np.float64) - parent.centroid)
    return local - _scale_local(node.d_vec, pk.s_y, pk.s_x)


def recover_params(model: RelationalModel, posed: PosedModel) -> dict[str, NodeParams]:
    """Invert pose_model on a posed tree (inverse kinematics, exact)."""
    out: dict[str, NodeParams] = {}
    root = model.root
    for name in model.order():
        node = model.nodes[name]
        pn = posed[name]
        if node.parent is None:
            out[name] = NodeParams(
                theta=pn.angle,
                s_y=pn.s_y,
                s_x=pn.s_x,
                tx=float(pn.centroid[0]),
                ty=float(pn.centroid[1]),
            )
            continue
        parent = posed[node.parent]
        theta = wrap_angle(pn.angle - parent.angle)
        if node.parent == root:
            local = rot2(-parent.angle) @ (pn.joint - parent.centroid)
            off = local - _scale_local(node.d_vec, parent.s_y, parent.s_x)
            out[name] = NodeParams(
                theta=theta, s_y=pn.s_y, s_x=pn.s_x, tx=float(off[0]), ty=float(off[1])
            )
        else:
            out[name] = NodeParams(theta=theta, s_y=pn.s_y, s_x=pn.s_x)
    return out


# ---------------------------------------------------------------------------
# projection into a frame


@dataclass(frozen=True)
class Projection:
    """One cloud resampled at a candidate pose, cropped to the frame.

    ``x0, y0`` anchor the window in frame coordinates. The three masks
    partition the window by membership value (snap tolerance INTERIOR_TOL).
    """

    label: int
    x0: int
    y0: int
    membership: np.ndarray
    interior: np.ndarray
    uncertainty: np.ndarray

    @property
    def exterior(self) -> np.ndarray:
        return ~self.interior & ~self.uncertainty

    @property
    def shape(self) -> tuple[int, int]:
        return self.membership.shape


def _bilinear(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear sample with zero outside the raster."""
    h, w = img.shape
    x0 = np.floor(xs)
    y0 = np.floor(ys)
    fx = xs - x0
    fy = ys - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    out = np.zeros(xs.shape, dtype=np.float64)
    for dy, dx, wgt in (
        (0, 0, (1 - fx) * (1 - fy)),
        (0, 1, fx * (1 - fy)),
        (1, 0, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        xi = x0 + dx
        yi = y0 + dy
        ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        if ok.any():
            out[ok] += wgt[ok] * img[yi[ok], xi[ok]]
    return out


def project_cloud(
    node: BodyNode, pose: PosedNode, frame_shape: tuple[int, int]
) -> Projection:
    """Resample a node's cloud at a posed similarity transform.

    The window is the posed cloud's bounding box padded by 2 px, clipped to
    the frame; OffFrame if nothing remains.
    """
    cloud = node.cloud
    h, w = cloud.membership.shape
    fh, fw = frame_shape
    fwd = rot2(pose.angle) @ np.diag([pose.s_y, pose.s_x]) @ rot2(-node.axis_angle)
    lc = cloud.local_centroid
    corners = np.array([[0, 0], [w - 1, 0], [0, h - 1], [w - 1, h - 1]], dtype=np.float64)
    world = (corners - lc) @ fwd.T + pose.centroid
    x0 = int(np.floor(world[:, 0].min())) - 2
    x1 = int(np.ceil(world[:, 0].max())) + 3
    y0 = int(np.floor(world[:, 1].min())) - 2
    y1 = int(np.ceil(world[:, 1].max())) + 3
    x0, x1 = max(0, x0), min(fw, x1)
    y0, y1 = max(0, y0), min(fh, y1)
    if x0 >= x1 or y0 >= y1:
        raise OffFrame(f"projection of {node.name} misses the frame")
    inv = rot2(node.axis_angle) @ np.diag([1.0 / pose.s_y, 1.0 / pose.s_x]) @ rot2(
        -pose.angle
    )
    gx, gy = np.meshgrid(np.arange(x0, x1, dtype=np.float64), np.arange(y0, y1, dtype=np.float64))
    dx = gx - pose.centroid[0]
    dy = gy - pose.centroid[1]
    lx = inv[0, 0] * dx + inv[0, 1] * dy + lc[0]
    ly = inv[1, 0] * dx + inv[1, 1] * dy + lc[1]
    m = _bilinear(cloud.membership, lx, ly)
    interior = m >= 1.0 - INTERIOR_TOL
    exterior = m <= INTERIOR_TOL
    return Projection(
        label=node.label,
        x0=x0,
        y0=y0,
        membership=m,
        interior=interior,
        uncertainty=~interior & ~exterior,
    )


# ---------------------------------------------------------------------------
# seeds and delineation


def _union_bbox(parts: dict[str, Projection]) -> tuple[int, int, int, int]:
    x0 = min(p.x0 for p in parts.values())
    y0 = min(p.y0 for p in parts.values())
    x1 = max(p.x0 + p.shape[1] for p in parts.values())
    y1 = max(p.y0 + p.shape[0] for p in parts.values())
    return x0, y0, x1, y1


def _paste(canvas: np.ndarray, proj_mask: np.ndarray, proj: Projection, x0: int, y0: int):
    oy = proj.y0 - y0
    ox = proj.x0 - x0
    canvas[oy : oy + proj_mask.shape[0], ox : ox + proj_mask.shape[1]] |= proj_mask


def _seed_grid(parts: dict[str, Projection], labels_of: dict[str, int]):
    """Seed layout for one part group on the union-window canvas.

    Returns (x0, y0, grid) with grid values -1 free, 0 background seed,
    >0 part seed. Foreground seeds are interior pixels touching the part's
    uncertainty region; background seeds touch some uncertainty region but
    are exterior to every part of the group, so a seam between two parts
    never grows background into either. First claim wins.
    """
    x0, y0, x1, y1 = _union_bbox(parts)
    shape = (y1 - y0, x1 - x0)
    grid = np.full(shape, -1, dtype=np.int32)
    near_any = np.zeros(shape, dtype=bool)
    ext_all = np.ones(shape, dtype=bool)
    fgs: dict[str, np.ndarray] = {}
    for name, proj in parts.items():
        near = ndimage.binary_dilation(proj.uncertainty, structure=_BOX3)
        fg = np.zeros(shape, dtype=bool)
        _paste(fg, proj.interior & near, proj, x0, y0)
        _paste(near_any, near, proj, x0, y0)
        ext = np.ones(shape, dtype=bool)  # zero membership outside the window
        py, px = proj.y0 - y0, proj.x0 - x0
        eh, ew = proj.exterior.shape
        ext[py : py + eh, px : px + ew] = proj.exterior
        ext_all &= ext
        fgs[name] = fg
    for name in parts:
        sel = fgs[name] & (grid == -1)
        grid[sel] = labels_of[name]
    grid[near_any & ext_all & (grid == -1)] = 0
    if not (grid > 0).any():
        raise NoForegroundSeeds(
            f"no foreground seeds for group {sorted(parts)}"
        )
    return x0, y0, grid


def _grid_to_seedset(grid: np.ndarray, x0: int, y0: int) -> SeedSet:
    ys, xs = np.nonzero(grid >= 0)
    return SeedSet(
        xy=np.stack([xs + x0, ys + y0], axis=1), labels=grid[ys, xs]
    )


def make_seeds(parts: dict[str, Projection]) -> SeedSet:
    """Competition seeds for one part group, in frame coordinates.

    Row-major pixel order; a pixel claimed by two parts keeps the first
    claimant in group order, and foreground always beats background.
    """
    labels_of = {name: proj.label for name, proj in parts.items()}
    x0, y0, grid = _seed_grid(parts, labels_of)
    return _grid_to_seedset(grid, x0, y0)


@dataclass(frozen=True)
class Delineation:
    """Delineated pixels of one part group.

    ``labels`` is the composed window map (0 background); ``masks`` maps part
    name to (N, 2) frame-coordinate pixels of M_l = interior plus forest
    ownership, which may overlap between parts where an interior covers a
    sibling's uncertainty region.
    """

    x0: int
    y0: int
    labels: np.ndarray
    masks: dict[str, np.ndarray]


def delineate(
    parts: dict[str, Projection],
    regions: np.ndarray,
    grad: np.ndarray,
    eta: float = 1.5,
) -> Delineation:
    """Resolve a group's uncertainty pixels by seed competition.

    The forest runs over the union of the group's uncertainty regions with
    gradient arc weights confined to superpixel regions; interiors are owned
    outright and override forest ownership in the composed map.
    """
    labels_of = {name: proj.label for name, proj in parts.items()}
    x0, y0, grid = _seed_grid(parts, labels_of)
    h, w = grid.shape
    domain = np.zeros((h, w), dtype=bool)
    interiors: dict[str, np.ndarray] = {}
    for name, proj in parts.items():
        _paste(domain, proj.uncertainty, proj, x0, y0)
        canvas = np.zeros((h, w), dtype=bool)
        _paste(canvas, proj.interior, proj, x0, y0)
        interiors[name] = canvas
    seeds = _grid_to_seedset(grid, 0, 0)  # window-local coordinates
    forest = ift_sc(
        grad[y0 : y0 + h, x0 : x0 + w],
        seeds,
        IftConfig(domain=domain, eta=eta, regions=regions[y0 : y0 + h, x0 : x0 + w]),
    )
    composed = np.zeros((h, w), dtype=np.int32)
    composed[domain] = forest.label[domain]
    masks: dict[str, np.ndarray] = {}
    for name, proj in parts.items():
        owned = interiors[name] | ((forest.label == proj.label) & domain)
        composed[interiors[name]] = proj.label
        ys, xs = np.nonzero(owned)
        masks[name] = np.stack([xs + x0, ys + y0], axis=1)
    return Delineation(x0=x0, y0=y0, labels=composed, masks=masks)


# ---------------------------------------------------------------------------
# pose extraction


@dataclass(frozen=True)
class Skeleton2D:
    """Named joints plus drawable segments, frame coordinates."""

    joints: dict[str, np.ndarray]
    segments: tuple[tuple[str, str], ...]


_CHAIN_ROLES = ("shoulder", "elbow", "wrist")


def _limb_prefix(limb_name: str) -> str:
    return limb_name.rsplit("_", 1)[0] if "_" in limb_name else limb_name


def extract_pose(model: RelationalModel, posed: PosedModel) -> Skeleton2D:
    """Read the stickman off a posed tree.

    Joint names: torso_center, neck, head_center, then per limb prefix
    (left/right) shoulder, elbow, and wrist, where the wrist falls back to
    the distal part's centroid when the chain has no third part.
    """
    schema = model.schema
    joints: dict[str, np.ndarray] = {}
    segments: list[tuple[str, str]] = []
    joints["torso_center"] = posed[schema.root].centroid.copy()
    if schema.head is not None and schema.head in posed.nodes:
        joints["neck"] = posed[schema.head].joint.copy()
        joints["head_center"] = posed[schema.head].centroid.copy()
        segments += [("torso_center", "neck"), ("neck", "head_center")]
    for limb_name, chain in schema.limbs.items():
        prefix = _limb_prefix(limb_name)
        prev = "torso_center"
        for i, part in enumerate(chain):
            role = _CHAIN_ROLES[i] if i < len(_CHAIN_ROLES) else f"j{i}"
            jname = f"{prefix}_{role}"
            joints[jname] = posed[part].joint.copy()
            segments.append((prev, jname))
            prev = jname
        if len(chain) < len(_CHAIN_ROLES):
            role = _CHAIN_ROLES[len(chain)]
            jname = f"{prefix}_{role}"
            joints[jname] = posed[chain[-1]].centroid.copy()
            segments.append((prev, jname))
    return Skeleton2D(joints=joints, segments=tuple(segments))


def skeleton_to_dict(sk: Skeleton2D) -> dict:
    return {
        "joints": {k: [float(v[0]), float(v[1])] for k, v in sk.joints.items()},
        "segments": [list(seg) for seg in sk.segments],
    }


def skeleton_from_dict(d: dict) -> Skeleton2D:
    return Skeleton2D(
        joints={k: np.array(v, dtype=np.float64) for k, v in d["joints"].items()},
        segments=tuple((a, b) for a, b in d["segments"]),
    )


# ---------------------------------------------------------------------------
# serialization


def _quantize_membership(m: np.ndarray) -> np.ndarray:
    q = np.rint(m * 65535.0)
    unc = (m > INTERIOR_TOL) & (m < 1.0 - INTERIOR_TOL)
    # keep quantized uncertainty strictly inside (0, maxval): the partition
    # must survive the round trip
    q[unc] = np.clip(q[unc], 1, 65534)
    return q.astype(np.uint16)


def save_model(path, model: RelationalModel, histograms, config: dict) -> None:
    """Write the model as versioned JSON plus one 16-bit PGM per cloud.

    ``histograms`` maps part name to an object with ``bins`` (flat float
    array), ``count`` and ``bins_per_channel`` attributes. Output bytes are a
    pure function of the inputs.
    """
    path = Path(path)
    cloud_dir = path.parent / f"{path.stem}_clouds"
    cloud_dir.mkdir(parents=True, exist_ok=True)
    schema = model.schema
    nodes_doc = {}
    for name, node in model.nodes.items():
        rel = f"{path.stem}_clouds/{name}.pgm"
        image_io.write_pgm16(path.parent / rel, _quantize_membership(node.cloud.membership))
        nodes_doc[name] = {
            "label": node.label,
            "parent": node.parent,
            "axis_angle": node.axis_angle,
            "joint0": [float(node.joint0[0]), float(node.joint0[1])],
            "c_vec": [float(node.c_vec[0]), float(node.c_vec[1])],
            "d_vec": [float(node.d_vec[0]), float(node.d_vec[1])],
            "theta0": node.theta0,
            "centroid": [float(node.cloud.centroid[0]), float(node.cloud.centroid[1])],
            "origin": [float(node.cloud.origin[0]), float(node.cloud.origin[1])],
            "cloud_file": rel,
        }
    hist_doc = {}
    for name, hist in histograms.items():
        bins = np.asarray(hist.bins, dtype=np.float64).ravel()
        nz = np.nonzero(bins)[0]
        hist_doc[name] = {
            "count": int(hist.count),
            "bins_per_channel": int(hist.bins_per_channel),
            "nonzero": [[int(i), float(bins[i])] for i in nz],
        }
    doc = {
        "format": MODEL_FORMAT,
        "gamma_p": model.nodes[model.root].cloud.gamma_p,
        "gamma_n": model.nodes[model.root].cloud.gamma_n,
        "sigma": model.nodes[model.root].cloud.sigma,
        "schema": {
            "labels": schema.labels,
            "parents": schema.parents,
            "root": schema.root,
            "limbs": {k: list(v) for k, v in schema.limbs.items()},
            "head": schema.head,
        },
        "node_order": model.order(),
        "nodes": nodes_doc,
        "histograms": hist_doc,
        "config": config,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_model(path):
    """Read back save_model output.

    Returns (model, histograms, config) where histograms hold search-module
    reference color distributions.
    """
    from .search import Histogram  # runtime import; search depends on this module

    path = Path(path)
    doc = json.loads(path.read_text())
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format {doc.get('format')!r}")
    sd = doc["schema"]
    schema = PartSchema(
        labels={k: int(v) for k, v in sd["labels"].items()},
        parents=dict(sd["parents"]),
        root=sd["root"],
        limbs={k: tuple(v) for k, v in sd["limbs"].items()},
        head=sd["head"],
    )
    gp, gn, sg = doc["gamma_p"], doc["gamma_n"], doc["sigma"]
    nodes: dict[str, BodyNode] = {}
    for name in doc["node_order"]:
        nd = doc["nodes"][name]
        q = image_io.read_pgm16(path.parent / nd["cloud_file"])
        cloud = Cloud(
            label=int(nd["label"]),
            membership=q.astype(np.float64) / 65535.0,
            origin=np.array(nd["origin"], dtype=np.float64),
            centroid=np.array(nd["centroid"], dtype=np.float64),
            gamma_p=gp,
            gamma_n=gn,
            sigma=sg,
        )
        nodes[name] = BodyNode(
            name=name,
            label=int(nd["label"]),
            parent=nd["parent"],
            cloud=cloud,
            axis_angle=float(nd["axis_angle"]),
            joint0=np.array(nd["joint0"], dtype=np.float64),
            c_vec=np.array(nd["c_vec"], dtype=np.float64),
            d_vec=np.array(nd["d_vec"], dtype=np.float64),
            theta0=float(nd["theta0"]),
        )
    model = RelationalModel(schema=schema, nodes=nodes)
    hists = {}
    for name, hd in doc["histograms"].items():
        bpc = int(hd["bins_per_channel"])
        bins = np.zeros(bpc**3, dtype=np.float64)
        for i, v in hd["nonzero"]:
            bins[int(i)] = float(v)
        hists[name] = Histogram(bins=bins, count=int(hd["count"]), bins_per_channel=bpc)
    return model, hists, doc["config"]
