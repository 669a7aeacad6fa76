"""Synthetic articulated-figure sequences with exact ground truth.

A rectangle person (torso, head, two two-segment arms) moves over a static
noise-textured background. Joint angles follow small scripted functions, so
every frame comes with exact masks, joint positions, and arm angles.
Rendering is pure integer/float math with a seeded generator; the same spec
always produces byte-identical outputs.

Each part wears four quadrant tones (split at its local midlines) from one
hue family, so a part's color histogram carries where-on-the-part
information: clipping, shifting, or rotating a candidate window visibly
reshuffles quadrant mass. The upper arms overlap the torso by a couple of
pixels, putting the shoulder pivots inside the overlap of the two parts'
uncertainty bands where model building can recover them.

Conventions: left arm = smaller x (viewer left). Shoulder angles raise the
arm outward from straight-down; elbow angles bend the forearm further
outward. All spec angles are degrees.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import image_io
from .errors import BadPuppetSpec
from .model import DEFAULT_SCHEMA

_MOTION_KEYS = ("left_shoulder", "right_shoulder", "left_elbow", "right_elbow")

# Four tones per part, quadrant order (proximal-left, proximal-right,
# distal-left, distal-right) in part-local coordinates. Channel values sit
# mid-bin (== 8 mod 16) so +-color_noise stays in-bin, and every tone lands
# in its own 16x16x16 histogram bin.
DEFAULT_COLORS = {
    "torso": ((40, 88, 200), (40, 120, 200), (72, 88, 200), (72, 120, 200)),
    "head": ((232, 184, 56), (232, 152, 56), (200, 184, 56), (200, 152, 56)),
    "left_upper_arm": ((200, 40, 40), (200, 72, 40), (168, 40, 40), (168, 72, 40)),
    "left_forearm": ((248, 120, 168), (248, 88, 168), (216, 120, 168), (216, 88, 168)),
    "right_upper_arm": ((40, 168, 56), (40, 200, 56), (72, 168, 56), (72, 200, 56)),
    "right_forearm": ((136, 216, 216), (136, 216, 184), (104, 216, 216), (104, 216, 184)),
}

_PATCH = 256  # side of the per-part texture patch


def angle_value(doc: dict, frame: int, fps: float) -> float:
    """Evaluate a motion function at a frame index, degrees.

    Kinds: const {value}; sin {amp, freq (Hz), phase (rad), offset};
    pulse {start, end, value, ramp} holding ``value`` on [start, end] with
    linear ramps of ``ramp`` frames on each side.
    """
    kind = doc.get("kind")
    if kind == "const":
        return float(doc["value"])
    if kind == "sin":
        return float(doc.get("offset", 0.0)) + float(doc["amp"]) * math.sin(
            2.0 * math.pi * float(doc["freq"]) * frame / fps + float(doc.get("phase", 0.0))
        )
    if kind == "pulse":
        start, end = int(doc["start"]), int(doc["end"])
        value = float(doc["value"])
        ramp = int(doc.get("ramp", 1))
        if ramp < 1 or end < start:
            raise BadPuppetSpec("pulse needs ramp >= 1 and end >= start")
        if frame <= start - ramp or frame >= end + ramp:
            return 0.0
        if frame < start:
            return value * (frame - (start - ramp)) / ramp
        if frame <= end:
            return value
        return value * ((end + ramp) - frame) / ramp
    raise BadPuppetSpec(f"unknown motion kind {kind!r}")


@dataclass(frozen=True)
class PuppetSpec:
    width: int = 320
    height: int = 240
    frames: int = 60
    fps: float = 30.0
    seed: int = 7
    start: tuple[float, float] = (110.0, 130.0)
    velocity: tuple[float, float] = (0.0, 0.0)
    torso_size: tuple[int, int] = (36, 72)  # width, height
    head_size: tuple[int, int] = (22, 22)
    head_gap: int = 2
    arm_width: int = 12
    upper_len: int = 30
    fore_len: int = 26
    shoulder_drop: int = 6
    # arm axis offset beyond the torso half width; anything below
    # arm_width/2 makes the arm overlap the torso (painted on top), and small
    # values keep the pivot inside both parts' uncertainty bands
    shoulder_out: int = 4
    background: tuple[int, int] = (120, 25)  # base gray, noise amplitude
    color_noise: int = 5  # gray texture riding on each part, moves with it
    colors: dict = field(default_factory=lambda: dict(DEFAULT_COLORS))
    motions: dict = field(
        default_factory=lambda: {k: {"kind": "const", "value": 0.0} for k in _MOTION_KEYS}
    )

    def __post_init__(self):
        if self.width < 32 or self.height < 32 or self.frames < 1:
            raise BadPuppetSpec("frame geometry too small")
        if self.fps <= 0:
            raise BadPuppetSpec("fps must be positive")
        if set(self.colors) != set(DEFAULT_COLORS):
            raise BadPuppetSpec(f"colors must name exactly {sorted(DEFAULT_COLORS)}")
        if self.arm_width < 9:
            raise BadPuppetSpec("arm_width must be >= 9 so arms keep a cloud core")
        base, amp = self.background
        if not (0 <= base - amp and base + amp <= 255):
            raise BadPuppetSpec("background noise range leaves [0, 255]")
        if self.color_noise < 0:
            raise BadPuppetSpec("color_noise must be >= 0")
        bins = {}
        gray_bins = {g >> 4 for g in range(base - amp, base + amp + 1)}
        for name, tones in self.colors.items():
            if len(tones) != 4 or any(len(c) != 3 for c in tones):
                raise BadPuppetSpec(f"{name} needs exactly 4 RGB quadrant tones")
            for qi, c in enumerate(tones):
                for v in c:
                    lo, hi = int(v) - self.color_noise, int(v) + self.color_noise
                    if lo < 0 or hi > 255 or (lo >> 4) != (hi >> 4):
                        raise BadPuppetSpec(
                            f"color_noise pushes {name} channel {v} out of its histogram bin"
                        )
                b = tuple(int(v) >> 4 for v in c)
                if b in bins.values():
                    raise BadPuppetSpec(f"tone {qi} of {name} collides in 16-bin space")
                if all(v in gray_bins for v in b):
                    raise BadPuppetSpec(f"tone {qi} of {name} hides in the background grays")
                bins[(name, qi)] = b
        missing = [k for k in _MOTION_KEYS if k not in self.motions]
        if missing:
            raise BadPuppetSpec(f"motions missing {missing}")
        for frame in range(self.frames):
            for k in _MOTION_KEYS:
                angle_value(self.motions[k], frame, self.fps)  # validates kind

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "frames": self.frames,
            "fps": self.fps,
            "seed": self.seed,
            "start": list(self.start),
            "velocity": list(self.velocity),
            "torso_size": list(self.torso_size),
            "head_size": list(self.head_size),
            "head_gap": self.head_gap,
            "arm_width": self.arm_width,
            "upper_len": self.upper_len,
            "fore_len": self.fore_len,
            "shoulder_drop": self.shoulder_drop,
            "shoulder_out": self.shoulder_out,
            "background": list(self.background),
            "color_noise": self.color_noise,
            "colors": {k: [list(c) for c in v] for k, v in self.colors.items()},
            "motions": self.motions,
        }

    @staticmethod
    def from_dict(d: dict) -> "PuppetSpec":
        kwargs = dict(d)
        for key in ("start", "velocity", "torso_size", "head_size", "background"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        if "colors" in kwargs:
            kwargs["colors"] = {
                k: tuple(tuple(c) for c in v) for k, v in kwargs["colors"].items()
            }
        try:
            return PuppetSpec(**kwargs)
        except TypeError as e:
            raise BadPuppetSpec(str(e)) from e


@dataclass(frozen=True)
class PuppetFrame:
    """One rendered frame with its ground truth."""

    index: int
    rgb: np.ndarray
    labels: np.ndarray
    joints: dict[str, np.ndarray]
    angles: dict[str, float]  # u/e/f per side, asymmetry conventions
    raw: dict[str, float]  # scripted shoulder/elbow angles


def _pose_points(spec: PuppetSpec, frame: int):
    """Anchor points and directions of every part at one frame."""
    cx = spec.start[0] + spec.velocity[0] * frame
    cy = spec.start[1] + spec.velocity[1] * frame
    tw, th = spec.torso_size
    hw_, hh = spec.head_size
    top = cy - th / 2.0
    pts = {
        "torso_center": np.array([cx, cy]),
        "torso_top": np.array([cx, top]),
        "head_center": np.array([cx, top - spec.head_gap - hh / 2.0]),
        "neck": np.array([cx, top - spec.head_gap / 2.0]),
    }
    dirs = {}
    for side, sgn in (("left", -1.0), ("right", 1.0)):
        a_s = math.radians(angle_value(spec.motions[f"{side}_shoulder"], frame, spec.fps))
        a_e = math.radians(angle_value(spec.motions[f"{side}_elbow"], frame, spec.fps))
        phi_u = sgn * a_s
        phi_f = sgn * (a_s + a_e)
        d_u = np.array([math.sin(phi_u), math.cos(phi_u)])
        d_f = np.array([math.sin(phi_f), math.cos(phi_f)])
        s = np.array([cx + sgn * (tw / 2.0 + spec.shoulder_out), top + spec.shoulder_drop])
        e = s + d_u * spec.upper_len
        w = e + d_f * spec.fore_len
        pts[f"{side}_shoulder"] = s
        pts[f"{side}_elbow"] = e
        pts[f"{side}_wrist"] = w
        dirs[f"{side}_upper"] = d_u
        dirs[f"{side}_fore"] = d_f
    return pts, dirs


def _fill_rect(labels, label, anchor, direction, length, width):
    """Paint an oriented rectangle: along in [0, length), perp in
    (-width/2, width/2]."""
    h, w = labels.shape
    d = np.asarray(direction, dtype=np.float64)
    pd = np.array([-d[1], d[0]])
    corners = [
        anchor + t * d + s * pd
        for t in (0.0, float(length))
        for s in (-width / 2.0, width / 2.0)
    ]
    xs = [c[0] for c in corners]
    ys = [c[1] for c in corners]
    x0, x1 = max(0, math.floor(min(xs)) - 1), min(w, math.ceil(max(xs)) + 2)
    y0, y1 = max(0, math.floor(min(ys)) - 1), min(h, math.ceil(max(ys)) + 2)
    gy, gx = np.mgrid[y0:y1, x0:x1]
    rx = gx - anchor[0]
    ry = gy - anchor[1]
    along = rx * d[0] + ry * d[1]
    perp = rx * pd[0] + ry * pd[1]
    inside = (along >= 0) & (along < length) & (perp > -width / 2.0) & (perp <= width / 2.0)
    labels[y0:y1, x0:x1][inside] = label


def _part_masks(spec: PuppetSpec, frame: int) -> dict[str, np.ndarray]:
    """Each part rasterized alone (no occlusion), for overlap validation."""
    pts, dirs = _pose_points(spec, frame)
    shape = (spec.height, spec.width)
    tw, th = spec.torso_size
    hw_, hh = spec.head_size
    out = {}
    plan = _paint_plan(spec, pts, dirs)
    for name, (anchor, direction, length, width) in plan.items():
        canvas = np.zeros(shape, dtype=np.int32)
        _fill_rect(canvas, 1, anchor, direction, length, width)
        out[name] = canvas > 0
    return out


def _paint_plan(spec: PuppetSpec, pts, dirs):
    """Part -> (anchor, direction, length, width) in paint order."""
    tw, th = spec.torso_size
    hw_, hh = spec.head_size
    down = np.array([0.0, 1.0])
    head_top = pts["head_center"] - np.array([0.0, hh / 2.0])
    return {
        "torso": (pts["torso_top"], down, th, tw),
        "head": (head_top, down, hh, hw_),
        "left_upper_arm": (pts["left_shoulder"], dirs["left_upper"], spec.upper_len, spec.arm_width),
        "left_forearm": (pts["left_elbow"], dirs["left_fore"], spec.fore_len, spec.arm_width),
        "right_upper_arm": (pts["right_shoulder"], dirs["right_upper"], spec.upper_len, spec.arm_width),
        "right_forearm": (pts["right_elbow"], dirs["right_fore"], spec.fore_len, spec.arm_width),
    }


def _gt_angles(spec: PuppetSpec, frame: int) -> tuple[dict, dict]:
    raw = {}
    angles = {}
    for side, tag in (("left", "l"), ("right", "r")):
        a_s = angle_value(spec.motions[f"{side}_shoulder"], frame, spec.fps)
        a_e = angle_value(spec.motions[f"{side}_elbow"], frame, spec.fps)
        raw[f"{side}_shoulder"] = a_s
        raw[f"{side}_elbow"] = a_e
        sgn = -1.0 if side == "left" else 1.0
        phi_f = math.radians(sgn * (a_s + a_e))
        angles[f"u_{tag}"] = abs(a_s)
        angles[f"e_{tag}"] = 180.0 - abs(a_e)
        angles[f"f_{tag}"] = math.degrees(
            math.atan2(-math.cos(phi_f), abs(math.sin(phi_f)))
        )
    return angles, raw


def validate_geometry(spec: PuppetSpec) -> None:
    """Reject specs whose parts get buried, break apart, or leave the frame.

    Later parts paint over earlier ones (arms over torso at the shoulders,
    possibly forearms over torso when bent), so overlap is allowed; what must
    hold at frame 0 is that every painted part keeps most of its solo
    rectangle and stays 8-connected, since the model is built there.
    """
    # bounds first: the rasterizers below assume a non-empty paint window
    for frame in range(spec.frames):
        pts, dirs = _pose_points(spec, frame)
        for name, (anchor, direction, length, width) in _paint_plan(spec, pts, dirs).items():
            d = np.asarray(direction)
            pd = np.array([-d[1], d[0]])
            for t in (0.0, float(length)):
                for s in (-width / 2.0, width / 2.0):
                    c = anchor + t * d + s * pd
                    if not (1 <= c[0] < spec.width - 1 and 1 <= c[1] < spec.height - 1):
                        raise BadPuppetSpec(
                            f"part {name} leaves the frame at t={frame}"
                        )
    masks0 = _part_masks(spec, 0)
    pts, dirs = _pose_points(spec, 0)
    labels0 = np.zeros((spec.height, spec.width), dtype=np.int32)
    for name, (anchor, direction, length, width) in _paint_plan(spec, pts, dirs).items():
        _fill_rect(labels0, DEFAULT_SCHEMA.labels[name], anchor, direction, length, width)
    for name, solo in masks0.items():
        if not solo.any():
            raise BadPuppetSpec(f"part {name} is empty at frame 0")
        painted = labels0 == DEFAULT_SCHEMA.labels[name]
        if painted.sum() < 0.7 * solo.sum():
            raise BadPuppetSpec(f"part {name} is mostly painted over at frame 0")
        _, n_comp = ndimage.label(painted, structure=np.ones((3, 3), dtype=bool))
        if n_comp != 1:
            raise BadPuppetSpec(f"part {name} is not 8-connected at frame 0")


def render_frame(
    spec: PuppetSpec, frame: int, background: np.ndarray, textures: dict[str, np.ndarray]
) -> PuppetFrame:
    pts, dirs = _pose_points(spec, frame)
    labels = np.zeros((spec.height, spec.width), dtype=np.int32)
    plan = _paint_plan(spec, pts, dirs)
    for name, (anchor, direction, length, width) in plan.items():
        _fill_rect(labels, DEFAULT_SCHEMA.labels[name], anchor, direction, length, width)
    rgb = background.copy()
    for name, (anchor, direction, length, width) in plan.items():
        sel = labels == DEFAULT_SCHEMA.labels[name]
        ys, xs = np.nonzero(sel)
        d = np.asarray(direction)
        pd = np.array([-d[1], d[0]])
        rx = xs - anchor[0]
        ry = ys - anchor[1]
        along = rx * d[0] + ry * d[1]
        perp = rx * pd[0] + ry * pd[1]
        # texture indexed in part coordinates so it travels with the part
        ui = (np.rint(along).astype(np.int64) + _PATCH // 2) % _PATCH
        vi = (np.rint(perp).astype(np.int64) + _PATCH // 2) % _PATCH
        noise = textures[name][vi, ui]
        quadrant = (along >= length / 2.0).astype(np.int64) * 2 + (perp > 0).astype(np.int64)
        base = np.array(spec.colors[name], dtype=np.int64)[quadrant]
        rgb[ys, xs] = np.clip(base + noise[:, None], 0, 255).astype(np.uint8)
    angles, raw = _gt_angles(spec, frame)
    joints = {
        k: pts[k].copy()
        for k in (
            "torso_center",
            "neck",
            "head_center",
            "left_shoulder",
            "left_elbow",
            "left_wrist",
            "right_shoulder",
            "right_elbow",
            "right_wrist",
        )
    }
    return PuppetFrame(
        index=frame, rgb=rgb, labels=labels, joints=joints, angles=angles, raw=raw
    )


def make_background(spec: PuppetSpec) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Static seeded background plus one gray texture patch per part."""
    base, amp = spec.background
    rng = np.random.default_rng(spec.seed)
    gray = rng.integers(base - amp, base + amp + 1, (spec.height, spec.width), dtype=np.int64)
    background = np.repeat(gray.astype(np.uint8)[..., None], 3, axis=2)
    n = spec.color_noise
    textures = {
        name: rng.integers(-n, n + 1, (_PATCH, _PATCH), dtype=np.int64)
        for name in DEFAULT_COLORS
    }
    return background, textures


def render_sequence(spec: PuppetSpec) -> list[PuppetFrame]:
    validate_geometry(spec)
    background, textures = make_background(spec)
    return [render_frame(spec, f, background, textures) for f in range(spec.frames)]


def write_sequence(spec: PuppetSpec, outdir) -> None:
    """Write frames/, masks/, and gt.json under ``outdir``."""
    outdir = Path(outdir)
    (outdir / "frames").mkdir(parents=True, exist_ok=True)
    (outdir / "masks").mkdir(parents=True, exist_ok=True)
    gt_frames = []
    for pf in render_sequence(spec):
        image_io.save_rgb(outdir / "frames" / f"f{pf.index:06d}.png", pf.rgb)
        image_io.save_labels(outdir / "masks" / f"m{pf.index:06d}.png", pf.labels)
        gt_frames.append(
            {
                "index": pf.index,
                "joints": {k: [float(v[0]), float(v[1])] for k, v in pf.joints.items()},
                "angles": {k: float(v) for k, v in pf.angles.items()},
                "scripted": {k: float(v) for k, v in pf.raw.items()},
            }
        )
    doc = {"spec": spec.to_dict(), "frames": gt_frames}
    (outdir / "gt.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
