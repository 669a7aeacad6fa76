"""Command line interface.

Subcommands: ``init`` builds a model from one labeled frame, ``track`` runs
the tracker over a frame directory, ``analyze`` turns a run's skeletons into
asymmetry reports, ``synth`` renders a synthetic ground-truth sequence.

Exit codes: 0 success, 1 usage error, 2 data or processing error. All
outputs except timing.csv are deterministic functions of the inputs.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import struct
import sys
import time
from pathlib import Path

import numpy as np

from . import asymmetry, image_io, svgplot
from .config import RunConfig, resolve_threads
from .errors import CsmError
from .model import build_model, load_model, save_model, skeleton_from_dict, skeleton_to_dict
from .puppet import PuppetSpec, write_sequence
from .search import Tracker, build_histogram

RUN_FORMAT = "csmpose-run/1"
SKEL_FORMAT = "csmpose-skel/1"
FLOW_MAGIC = b"CSMFLOW1"


def _load_config(path: str | None, fallback: dict | None = None) -> RunConfig:
    if path is not None:
        return RunConfig.from_file(path)
    if fallback is not None:
        return RunConfig.from_dict(fallback)
    return RunConfig()


def _frame_listing(frames_dir: Path) -> list[Path]:
    if not frames_dir.is_dir():
        raise CsmError(f"{frames_dir} is not a directory")
    listing = sorted(frames_dir.glob("*.png"))
    if not listing:
        raise CsmError(f"no .png frames under {frames_dir}")
    return listing


def _parse_range(text: str | None, count: int) -> tuple[int, int]:
    if text is None:
        return 0, count - 1
    try:
        a_s, b_s = text.split("..")
        a, b = int(a_s), int(b_s)
    except ValueError:
        raise CsmError(f"bad --range {text!r}, expected A..B") from None
    if not (0 <= a <= b < count):
        raise CsmError(f"--range {text} outside 0..{count - 1}")
    return a, b


def write_flow(path, flow: np.ndarray) -> None:
    """Binary flow dump: magic, little-endian int32 w h, float32 dx,dy."""
    h, w = flow.shape[:2]
    with open(path, "wb") as fh:
        fh.write(FLOW_MAGIC)
        fh.write(struct.pack("<ii", w, h))
        fh.write(flow.astype("<f4").tobytes())


def read_flow(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:8] != FLOW_MAGIC:
        raise CsmError(f"{path} is not a flow dump")
    w, h = struct.unpack("<ii", data[8:16])
    arr = np.frombuffer(data[16:], dtype="<f4")
    return arr.reshape(h, w, 2).astype(np.float32)


def cmd_init(args) -> int:
    cfg = _load_config(args.config)
    rgb = image_io.load_rgb(args.frame)
    labels = image_io.load_labels(args.mask)
    schema = cfg.schema()
    model = build_model(rgb, labels, schema, cfg.gamma_p, cfg.gamma_n, cfg.sigma)
    hists = {}
    for name, label in schema.labels.items():
        ys, xs = np.nonzero(labels == label)
        pixels = np.stack([xs, ys], axis=1)
        hists[name] = build_histogram(pixels, rgb, cfg.bins_per_channel)
    save_model(args.out, model, hists, cfg.to_dict())
    print(f"model written to {args.out}")
    print(f"{'part':<18}{'parent':<18}{'joint_x':>9}{'joint_y':>9}{'theta0_deg':>12}")
    for name in model.order():
        node = model.nodes[name]
        if node.parent is None:
            c = node.cloud.centroid
            print(f"{name:<18}{'-':<18}{c[0]:>9.2f}{c[1]:>9.2f}{0.0:>12.2f}")
        else:
            j = node.joint0
            print(
                f"{name:<18}{node.parent:<18}{j[0]:>9.2f}{j[1]:>9.2f}"
                f"{math.degrees(node.theta0):>12.2f}"
            )
    return 0


def cmd_track(args) -> int:
    model, hists, cfg_doc = load_model(args.model)
    cfg = _load_config(args.config, cfg_doc)
    threads = resolve_threads()
    print(f"threads: {threads}")
    try:  # single-threaded algorithms; cap numba's pool to the request
        import numba

        numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))
    except Exception:
        pass

    frames = _frame_listing(Path(args.frames))
    a, b = _parse_range(args.range, len(frames))
    out = Path(args.out)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    (out / "skeletons").mkdir(parents=True, exist_ok=True)
    if args.save_flow:
        (out / "flow").mkdir(parents=True, exist_ok=True)

    part_names = model.order()
    score_rows = []
    timings = []
    tracker = Tracker(model, hists, cfg)
    for idx in range(a, b + 1):
        t0 = time.perf_counter()
        rgb = image_io.load_rgb(frames[idx])
        if idx == a:
            result = tracker.start(rgb)
        else:
            result = tracker.step(rgb)
        timings.append((idx, time.perf_counter() - t0))
        image_io.save_labels(out / "masks" / f"l{idx:06d}.png", result.labels)
        skel_doc = {"format": SKEL_FORMAT, "frame": idx, **skeleton_to_dict(result.skeleton)}
        (out / "skeletons" / f"s{idx:06d}.json").write_text(
            json.dumps(skel_doc, indent=2, sort_keys=True) + "\n"
        )
        if args.save_flow and result.flow is not None:
            write_flow(out / "flow" / f"{idx:06d}.bin", result.flow)
        score_rows.append(
            [idx]
            + [result.scores.get(n, 0.0) for n in part_names]
            + [sum(result.evals.values()), int(result.diverged)]
        )
        status = "diverged" if result.diverged else "ok"
        mean_f = float(np.mean([result.scores.get(n, 0.0) for n in part_names]))
        print(f"frame {idx}: {status} mean_f={mean_f:.3f}")

    header = ["frame"] + part_names + ["evals", "diverged"]
    lines = [",".join(header)]
    for row in score_rows:
        lines.append(
            ",".join(
                str(v) if isinstance(v, int) else f"{v:.6f}" for v in row
            )
        )
    (out / "scores.csv").write_text("\n".join(lines) + "\n")
    (out / "timing.csv").write_text(
        "frame,seconds\n" + "\n".join(f"{i},{s:.6f}" for i, s in timings) + "\n"
    )
    manifest = {
        "format": RUN_FORMAT,
        "model": str(args.model),
        "frames_dir": str(args.frames),
        "frames": [p.name for p in frames],
        "range": [a, b],
        "config": cfg.to_dict(),
        "threads": threads,
        "parts": part_names,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"run written to {out}")
    return 0


def cmd_analyze(args) -> int:
    run = Path(args.run)
    manifest = json.loads((run / "manifest.json").read_text())
    if manifest.get("format") != RUN_FORMAT:
        raise CsmError(f"{run} is not a track run directory")
    cfg = _load_config(args.config, manifest["config"])
    a, b = manifest["range"]
    records = []
    for idx in range(a, b + 1):
        sk_path = run / "skeletons" / f"s{idx:06d}.json"
        sk = None
        if sk_path.exists():
            doc = json.loads(sk_path.read_text())
            sk = skeleton_from_dict(doc)
        records.append(
            asymmetry.frame_asymmetry(
                sk,
                idx,
                tau_deg=cfg.asym_tau_deg,
                sigma_deg=cfg.asym_sigma_deg,
                as_threshold=cfg.asym_as_threshold,
                ad_threshold_deg=cfg.asym_ad_threshold_deg,
            )
        )
    stats = asymmetry.sequence_stats(records, cfg.fps)
    out = Path(args.out) if args.out else run / "analysis"
    out.mkdir(parents=True, exist_ok=True)
    asymmetry.write_asymmetry_csv(out / "asymmetry.csv", records)
    asymmetry.write_summary_json(
        out / "summary.json",
        stats,
        fps=cfg.fps,
        tau_deg=cfg.asym_tau_deg,
        sigma_deg=cfg.asym_sigma_deg,
        as_threshold=cfg.asym_as_threshold,
        ad_threshold_deg=cfg.asym_ad_threshold_deg,
    )
    svgplot.polyline_plot(
        out / "as_star.svg",
        {"AS*": [r.as_star for r in records]},
        title="combined asymmetry score",
        y_label="AS*",
        hlines=(cfg.asym_as_threshold,),
    )
    svgplot.polyline_plot(
        out / "forearm_angles.svg",
        {
            "left": [r.angles.f_l if r.angles else float("nan") for r in records],
            "right": [r.angles.f_r if r.angles else float("nan") for r in records],
        },
        title="forearm angle vs horizontal",
        y_label="degrees",
    )
    print(
        f"static score {stats.ss:.2f}% ({stats.n_asymmetric}/{stats.n_evaluable} frames), "
        f"dynamic score {stats.ds:.2f}% ({stats.n_asymmetric_windows}/{stats.n_windows} "
        f"windows of {stats.window})"
    )
    print(f"analysis written to {out}")
    return 0


_PRESETS = {
    "still": {},
    "raise": {
        "motions": {
            "left_shoulder": {"kind": "const", "value": 0.0},
            "right_shoulder": {"kind": "pulse", "start": 20, "end": 40, "value": 90.0, "ramp": 3},
            "left_elbow": {"kind": "const", "value": 0.0},
            "right_elbow": {"kind": "const", "value": 0.0},
        },
    },
    "wave": {
        "velocity": (2.0, 0.0),
        "motions": {
            "left_shoulder": {"kind": "const", "value": 0.0},
            "right_shoulder": {"kind": "const", "value": 0.0},
            "left_elbow": {"kind": "sin", "amp": 40.0, "freq": 0.5},
            "right_elbow": {"kind": "sin", "amp": 40.0, "freq": 0.5},
        },
    },
}


def cmd_synth(args) -> int:
    if args.spec:
        spec = PuppetSpec.from_dict(json.loads(Path(args.spec).read_text()))
    else:
        spec = PuppetSpec(**_PRESETS[args.preset])
    overrides = {}
    if args.frames is not None:
        overrides["frames"] = args.frames
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        spec = dataclasses.replace(spec, **overrides)
    write_sequence(spec, args.out)
    print(f"{spec.frames} frames written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csmpose",
        description="articulated cloud-model body tracking and arm asymmetry analysis",
    )
    parser.add_argument("--version", action="version", version="csmpose 0.1.0")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="build a model from one labeled frame")
    p.add_argument("--frame", required=True, help="RGB png of the init frame")
    p.add_argument("--mask", required=True, help="paletted png, pixel value = part label")
    p.add_argument("--out", required=True, help="model json path")
    p.add_argument("--config", help="run config json")
    p.set_defaults(fn=cmd_init)

    p = sub.add_parser("track", help="track a frame directory")
    p.add_argument("--model", required=True, help="model json from init")
    p.add_argument("--frames", required=True, help="directory of png frames")
    p.add_argument("--out", required=True, help="run output directory")
    p.add_argument("--config", help="run config json overriding the model's")
    p.add_argument("--range", help="inclusive frame index range A..B, A is the init frame")
    p.add_argument("--save-flow", action="store_true", help="dump per-frame flow fields")
    p.set_defaults(fn=cmd_track)

    p = sub.add_parser("analyze", help="arm asymmetry report from a track run")
    p.add_argument("--run", required=True, help="track output directory")
    p.add_argument("--out", help="report directory (default RUN/analysis)")
    p.add_argument("--config", help="run config json overriding the run's")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("synth", help="render a synthetic ground-truth sequence")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--spec", help="puppet spec json")
    p.add_argument("--preset", choices=sorted(_PRESETS), default="still")
    p.add_argument("--frames", type=int, help="override frame count")
    p.add_argument("--seed", type=int, help="override background seed")
    p.set_defaults(fn=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse exits 2 on usage errors, 0 on --help
        return 0 if e.code == 0 else 1
    try:
        return args.fn(args)
    except CsmError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
