"""Articulated fuzzy cloud-model body tracking and arm asymmetry analysis.

Build a relational cloud model from one labeled frame, track it through
video by multi-scale local search over an articulated parameter space, and
turn the recovered 2D poses into arm asymmetry measures.
"""
from .asymmetry import (
    ArmAngles,
    FrameAsymmetry,
    SequenceStats,
    arm_angles,
    asymmetry_score,
    frame_asymmetry,
    sequence_stats,
)
from .config import RunConfig, resolve_threads
from .errors import CsmError
from .flow import dense_flow, estimate_params, propagate_labels
from .ift import IftConfig, SeedSet, ift_sc, label_uncertainty
from .imgcore import gradient_magnitude, pca_orientation, signed_edt, to_lab
from .model import (
    DEFAULT_SCHEMA,
    Cloud,
    NodeParams,
    PartSchema,
    RelationalModel,
    Skeleton2D,
    build_cloud,
    build_model,
    delineate,
    extract_pose,
    identity_params,
    load_model,
    make_seeds,
    membership_from_distance,
    pose_model,
    project_cloud,
    recover_params,
    save_model,
)
from .puppet import PuppetSpec, render_sequence, write_sequence
from .search import (
    Histogram,
    MspsResult,
    SearchSpec,
    Tracker,
    build_histogram,
    chi_square,
    msps_maximize,
    recognition_score,
    track_frame,
)
from .superpix import segment_superpixels

__version__ = "0.1.0"

__all__ = [
    "ArmAngles",
    "Cloud",
    "CsmError",
    "DEFAULT_SCHEMA",
    "FrameAsymmetry",
    "Histogram",
    "IftConfig",
    "MspsResult",
    "NodeParams",
    "PartSchema",
    "PuppetSpec",
    "RelationalModel",
    "RunConfig",
    "SearchSpec",
    "SeedSet",
    "SequenceStats",
    "Skeleton2D",
    "Tracker",
    "arm_angles",
    "asymmetry_score",
    "build_cloud",
    "build_histogram",
    "build_model",
    "chi_square",
    "delineate",
    "dense_flow",
    "estimate_params",
    "extract_pose",
    "frame_asymmetry",
    "gradient_magnitude",
    "identity_params",
    "ift_sc",
    "label_uncertainty",
    "load_model",
    "make_seeds",
    "membership_from_distance",
    "msps_maximize",
    "pca_orientation",
    "pose_model",
    "project_cloud",
    "propagate_labels",
    "recognition_score",
    "recover_params",
    "render_sequence",
    "resolve_threads",
    "save_model",
    "segment_superpixels",
    "sequence_stats",
    "signed_edt",
    "to_lab",
    "track_frame",
    "write_sequence",
    "__version__",
]
