"""Arm configuration angles and posture asymmetry analytics.

Angles are read off tracked 2D skeletons: upper-arm elevation against the
image-down vertical, interior elbow angle (180 = straight), and signed
forearm elevation against the horizontal. Left/right differences pass
through a sigmoid score, frames are flagged by joint thresholds on the score
and the forearm-angle difference, and flags aggregate into a static score
(fraction of frames) and a dynamic score (fraction of half-second windows).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptySeries, MissingArm
from .model import Skeleton2D

_REQUIRED = tuple(
    f"{side}_{role}" for side in ("left", "right") for role in ("shoulder", "elbow", "wrist")
)


@dataclass(frozen=True)
class ArmAngles:
    """Per-arm configuration, degrees.

    u: upper arm vs straight down, [0, 180]. e: interior elbow, [0, 180].
    f: forearm vs horizontal, signed, [-90, 90], up positive.
    """

    u_l: float
    u_r: float
    e_l: float
    e_r: float
    f_l: float
    f_r: float


def _vec(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    v = b - a
    if float(np.hypot(v[0], v[1])) < 1e-9:
        raise MissingArm("degenerate (zero length) arm segment")
    return v


def arm_angles(sk: Skeleton2D) -> ArmAngles:
    """Extract both arms' angles; MissingArm if a joint is absent."""
    missing = [name for name in _REQUIRED if name not in sk.joints]
    if missing:
        raise MissingArm(f"skeleton lacks joints: {missing}")
    out = {}
    for side, tag in (("left", "l"), ("right", "r")):
        sh = sk.joints[f"{side}_shoulder"]
        el = sk.joints[f"{side}_elbow"]
        wr = sk.joints[f"{side}_wrist"]
        upper = _vec(sh, el)
        fore = _vec(el, wr)
        un = upper / np.linalg.norm(upper)
        out[f"u_{tag}"] = math.degrees(math.acos(float(np.clip(un[1], -1.0, 1.0))))
        back = _vec(el, sh)
        bn = back / np.linalg.norm(back)
        fn = fore / np.linalg.norm(fore)
        out[f"e_{tag}"] = math.degrees(math.acos(float(np.clip(bn @ fn, -1.0, 1.0))))
        out[f"f_{tag}"] = math.degrees(math.atan2(-fore[1], abs(fore[0])))
    return ArmAngles(**out)


def asymmetry_score(alpha_deg: float, tau_deg: float = 45.0, sigma_deg: float = 15.0) -> float:
    """Sigmoid score of an absolute angle difference; crosses 1 at tau."""
    if alpha_deg < 0:
        raise ValueError("angle difference must be non-negative")
    return 2.0 / (1.0 + math.exp(-(alpha_deg - tau_deg) / sigma_deg))


@dataclass(frozen=True)
class FrameAsymmetry:
    """Asymmetry verdict for one frame; scores are nan when unevaluable."""

    frame: int
    angles: ArmAngles | None
    as_u: float
    as_f: float
    as_star: float
    ad_f: float
    asymmetric: bool
    evaluable: bool


def frame_asymmetry(
    sk: Skeleton2D | None,
    frame: int = 0,
    *,
    tau_deg: float = 45.0,
    sigma_deg: float = 15.0,
    as_threshold: float = 1.0,
    ad_threshold_deg: float = 45.0,
) -> FrameAsymmetry:
    """Score one frame; a missing skeleton or arm makes it unevaluable.

    A frame is asymmetric when the larger of the two sigmoid scores (upper
    arm and elbow differences) reaches as_threshold AND the forearm angle
    difference reaches ad_threshold_deg.
    """
    nan = float("nan")
    if sk is None:
        return FrameAsymmetry(frame, None, nan, nan, nan, nan, False, False)
    try:
        ang = arm_angles(sk)
    except MissingArm:
        return FrameAsymmetry(frame, None, nan, nan, nan, nan, False, False)
    as_u = asymmetry_score(abs(ang.u_l - ang.u_r), tau_deg, sigma_deg)
    as_f = asymmetry_score(abs(ang.e_l - ang.e_r), tau_deg, sigma_deg)
    as_star = max(as_u, as_f)
    ad_f = abs(ang.f_l - ang.f_r)
    flag = as_star >= as_threshold and ad_f >= ad_threshold_deg
    return FrameAsymmetry(frame, ang, as_u, as_f, as_star, ad_f, flag, True)


@dataclass(frozen=True)
class SequenceStats:
    """Static and dynamic asymmetry summary of a frame series."""

    ss: float
    ds: float
    window: int
    n_frames: int
    n_evaluable: int
    n_asymmetric: int
    n_windows: int
    n_asymmetric_windows: int


def sequence_stats(records: list[FrameAsymmetry], fps: float) -> SequenceStats:
    """Aggregate per-frame flags.

    SS is the percentage of evaluable frames flagged asymmetric. DS chops the
    whole series (evaluable or not, in order) into non-overlapping
    round(fps/2)-frame windows, the final partial window included, and takes
    the percentage of windows containing at least one flagged frame. Raises
    EmptySeries when no frame is evaluable.
    """
    n_eval = sum(1 for r in records if r.evaluable)
    if n_eval == 0:
        raise EmptySeries("no evaluable frames in the series")
    n_asym = sum(1 for r in records if r.asymmetric)
    window = max(1, round(fps / 2.0))
    n_windows = (len(records) + window - 1) // window
    n_asym_win = 0
    for wi in range(n_windows):
        chunk = records[wi * window : (wi + 1) * window]
        if any(r.asymmetric for r in chunk):
            n_asym_win += 1
    return SequenceStats(
        ss=100.0 * n_asym / n_eval,
        ds=100.0 * n_asym_win / n_windows,
        window=window,
        n_frames=len(records),
        n_evaluable=n_eval,
        n_asymmetric=n_asym,
        n_windows=n_windows,
        n_asymmetric_windows=n_asym_win,
    )


CSV_COLUMNS = (
    "frame",
    "u_l",
    "u_r",
    "e_l",
    "e_r",
    "f_l",
    "f_r",
    "AS_u",
    "AS_f",
    "AS_star",
    "AD_f",
    "asymmetric",
    "evaluable",
)


def write_asymmetry_csv(path, records: list[FrameAsymmetry]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            a = r.angles
            angles = (
                [a.u_l, a.u_r, a.e_l, a.e_r, a.f_l, a.f_r] if a is not None else [float("nan")] * 6
            )
            row = [r.frame]
            row += [f"{v:.6f}" for v in angles]
            row += [f"{v:.6f}" for v in (r.as_u, r.as_f, r.as_star, r.ad_f)]
            row += [int(r.asymmetric), int(r.evaluable)]
            writer.writerow(row)


def read_asymmetry_csv(path) -> list[FrameAsymmetry]:
    out: list[FrameAsymmetry] = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            evaluable = row["evaluable"] == "1"
            angles = (
                ArmAngles(
                    u_l=float(row["u_l"]),
                    u_r=float(row["u_r"]),
                    e_l=float(row["e_l"]),
                    e_r=float(row["e_r"]),
                    f_l=float(row["f_l"]),
                    f_r=float(row["f_r"]),
                )
                if evaluable
                else None
            )
            out.append(
                FrameAsymmetry(
                    frame=int(row["frame"]),
                    angles=angles,
                    as_u=float(row["AS_u"]),
                    as_f=float(row["AS_f"]),
                    as_star=float(row["AS_star"]),
                    ad_f=float(row["AD_f"]),
                    asymmetric=row["asymmetric"] == "1",
                    evaluable=evaluable,
                )
            )
    return out


def write_summary_json(
    path,
    stats: SequenceStats,
    *,
    fps: float,
    tau_deg: float,
    sigma_deg: float,
    as_threshold: float,
    ad_threshold_deg: float,
) -> None:
    doc = {
        "static_score_percent": stats.ss,
        "dynamic_score_percent": stats.ds,
        "window_frames": stats.window,
        "fps": fps,
        "frames": stats.n_frames,
        "evaluable_frames": stats.n_evaluable,
        "asymmetric_frames": stats.n_asymmetric,
        "windows": stats.n_windows,
        "asymmetric_windows": stats.n_asymmetric_windows,
        "thresholds": {
            "as_threshold": as_threshold,
            "ad_threshold_deg": ad_threshold_deg,
            "tau_deg": tau_deg,
            "sigma_deg": sigma_deg,
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
