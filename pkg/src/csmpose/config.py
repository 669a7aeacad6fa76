"""Run configuration: every tunable of the pipeline in one validated place.

A config travels as JSON. cmd_init embeds its echo in the model file so a
later track run reproduces the exact same settings without re-supplying the
file; CSMPOSE_THREADS caps worker threads (the pipeline is single-threaded,
so the cap is recorded and trivially honored).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import BadConfig
from .model import DEFAULT_SCHEMA, PartSchema

DEFAULT_SCHEDULE = (1.0, 0.5, 0.25, 0.125, 0.0625)


@dataclass(frozen=True)
class RunConfig:
    # cloud construction
    gamma_p: float = 5.0
    gamma_n: float = -4.0
    sigma: float = 1.5
    # delineation
    eta: float = 1.5
    superpixel_k: float = 300.0
    superpixel_min_size: int | None = None  # None: 0.02% of the frame area
    # optical flow
    flow_levels: int = 3
    flow_iterations: int = 100
    flow_alpha: float = 15.0
    median_radius: int = 2
    # appearance
    bins_per_channel: int = 16
    # parameter estimation and search boxes
    theta_bound_root_deg: float = 10.0
    theta_bound_neck_deg: float = 5.0
    theta_bound_limb_deg: float = 30.0
    scale_bound: float = 0.02
    beta: float = 1.5
    schedule: tuple[float, ...] = DEFAULT_SCHEDULE
    budget: int = 2000
    divergence_threshold: float = 0.2
    # sequence analytics
    fps: float = 30.0
    asym_tau_deg: float = 45.0
    asym_sigma_deg: float = 15.0
    asym_as_threshold: float = 1.0
    asym_ad_threshold_deg: float = 45.0
    # body schema (serialized form; see schema())
    schema_doc: dict | None = None

    def __post_init__(self):
        if not (self.gamma_n < 0.0 < self.gamma_p):
            raise BadConfig("need gamma_n < 0 < gamma_p")
        if self.sigma <= 0 or self.eta <= 0 or self.superpixel_k <= 0:
            raise BadConfig("sigma, eta and superpixel_k must be positive")
        if self.superpixel_min_size is not None and self.superpixel_min_size < 1:
            raise BadConfig("superpixel_min_size must be >= 1")
        if self.flow_levels < 1 or self.flow_iterations < 1:
            raise BadConfig("flow pyramid needs >= 1 level and >= 1 iteration")
        if self.flow_alpha <= 0:
            raise BadConfig("flow_alpha must be positive")
        if self.median_radius < 1:
            raise BadConfig("median_radius must be >= 1")
        bpc = self.bins_per_channel
        if bpc < 2 or bpc > 256 or bpc & (bpc - 1):
            raise BadConfig("bins_per_channel must be a power of two in [2, 256]")
        for name in ("theta_bound_root_deg", "theta_bound_neck_deg", "theta_bound_limb_deg"):
            if getattr(self, name) <= 0:
                raise BadConfig(f"{name} must be positive")
        if self.scale_bound <= 0 or self.beta < 1.0:
            raise BadConfig("scale_bound must be positive and beta >= 1")
        sched = tuple(float(s) for s in self.schedule)
        if not sched or sched[0] > 1.0 or any(s <= 0 for s in sched):
            raise BadConfig("schedule multipliers must be in (0, 1], coarsest first")
        if any(sched[i + 1] >= sched[i] for i in range(len(sched) - 1)):
            raise BadConfig("schedule must be strictly decreasing")
        object.__setattr__(self, "schedule", sched)
        if self.budget < 1:
            raise BadConfig("budget must be >= 1")
        if not (0.0 <= self.divergence_threshold <= 1.0):
            raise BadConfig("divergence_threshold must lie in [0, 1]")
        if self.fps <= 0:
            raise BadConfig("fps must be positive")
        if self.asym_sigma_deg <= 0 or self.asym_tau_deg < 0:
            raise BadConfig("bad asymmetry sigmoid parameters")
        if self.schema_doc is not None:
            self.schema()  # validates

    def schema(self) -> PartSchema:
        if self.schema_doc is None:
            return DEFAULT_SCHEMA
        d = self.schema_doc
        try:
            return PartSchema(
                labels={k: int(v) for k, v in d["labels"].items()},
                parents=dict(d["parents"]),
                root=d["root"],
                limbs={k: tuple(v) for k, v in d["limbs"].items()},
                head=d.get("head"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise BadConfig(f"bad schema: {e}") from e

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        known = {f.name for f in fields(RunConfig)}
        unknown = set(d) - known
        if unknown:
            raise BadConfig(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(d)
        if "schedule" in kwargs:
            kwargs["schedule"] = tuple(kwargs["schedule"])
        try:
            return RunConfig(**kwargs)
        except TypeError as e:
            raise BadConfig(str(e)) from e

    @staticmethod
    def from_file(path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise BadConfig(f"cannot read config {path}: {e}") from e
        if not isinstance(doc, dict):
            raise BadConfig("config root must be a JSON object")
        return RunConfig.from_dict(doc)


def resolve_threads() -> int:
    """Worker cap from CSMPOSE_THREADS (default 1)."""
    raw = os.environ.get("CSMPOSE_THREADS")
    if raw is None or raw.strip() == "":
        return 1
    try:
        n = int(raw)
    except ValueError as e:
        raise BadConfig(f"CSMPOSE_THREADS must be an integer, got {raw!r}") from e
    if n < 1:
        raise BadConfig("CSMPOSE_THREADS must be >= 1")
    return n
