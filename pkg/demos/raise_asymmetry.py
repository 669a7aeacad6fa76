"""Full pipeline demo: detect a one-sided arm raise from rendered video.

Drives the same four commands a shell user would run (synth, init, track,
analyze) against a sequence where the right arm rises to 90 degrees for a
stretch of frames while the left stays down, then reads the reports back
and prints which frames were flagged asymmetric and the static/dynamic
scores.

Run: python demos/raise_asymmetry.py [--out DIR]
"""
import argparse
import json
import tempfile
from pathlib import Path

from csmpose.asymmetry import read_asymmetry_csv
from csmpose.cli import main as csmpose


def run(out: Path) -> None:
    seq, run_dir, model = out / "seq", out / "run", out / "model.json"
    steps = [
        ["synth", "--out", str(seq), "--preset", "raise"],
        [
            "init",
            "--frame", str(seq / "frames" / "f000000.png"),
            "--mask", str(seq / "masks" / "m000000.png"),
            "--out", str(model),
        ],
        ["track", "--model", str(model), "--frames", str(seq / "frames"), "--out", str(run_dir)],
        ["analyze", "--run", str(run_dir)],
    ]
    for argv in steps:
        print(f"\n$ csmpose {' '.join(argv)}")
        code = csmpose(argv)
        assert code == 0, f"step failed with exit code {code}"

    records = read_asymmetry_csv(run_dir / "analysis" / "asymmetry.csv")
    flagged = [r.frame for r in records if r.asymmetric]
    summary = json.loads((run_dir / "analysis" / "summary.json").read_text())
    print(f"\nflagged frames: {flagged[0]}..{flagged[-1]} ({len(flagged)} total)")
    print(
        f"static score  SS = {summary['static_score_percent']:.1f}% "
        f"({summary['asymmetric_frames']}/{summary['evaluable_frames']} frames)"
    )
    print(
        f"dynamic score DS = {summary['dynamic_score_percent']:.1f}% "
        f"({summary['asymmetric_windows']}/{summary['windows']} half-second windows)"
    )
    print(f"plots: {run_dir / 'analysis' / 'as_star.svg'}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", help="working directory (default: a temp dir)")
    args = parser.parse_args()
    if args.out:
        run(Path(args.out))
    else:
        with tempfile.TemporaryDirectory() as tmp:
            run(Path(tmp))


if __name__ == "__main__":
    main()
