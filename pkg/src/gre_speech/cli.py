"""Command-line entry point: ``python -m gre_speech <verb> [flags]``.

Each verb writes its report under ``--out`` and exits 0 only when every
check it asserts passes.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import harness as H
from .hadf import BREAK_MODES


def _run_config(args) -> H.RunConfig:
    run = H.RunConfig.from_json(Path(args.config).read_text()) if args.config else H.RunConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.break_mode is not None:
        changes["break_mode"] = args.break_mode
    if getattr(args, "steps", None) is not None:
        changes["steps"] = args.steps
    return replace(run, **changes) if changes else run


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="RunConfig JSON file")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--break-mode", choices=BREAK_MODES, help="structural ablation to apply")
    common.add_argument("--out", default="out", help="report directory (default: out)")

    parser = argparse.ArgumentParser(prog="gre-speech", description="Rotation-equivariant speech model checks and tools.")
    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("equivcheck", parents=[common], help="rotation-equivariance residuals per unit")
    sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient checks")
    p = sub.add_parser("phase-retrieval", parents=[common], help="single-utterance phase overfit")
    p.add_argument("--wav", help="16 kHz mono WAV (<= 2 s); default is a synthetic harmonic tone")
    p.add_argument("--steps", type=int, help="overrides the config step count")
    p = sub.add_parser("eval", parents=[common], help="metrics over a degraded,clean manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--params", help="saved model weights (.npz); omit for pass-through")
    p = sub.add_parser("attn-dump", parents=[common], help="frequency-attention maps of one block as CSV")
    p.add_argument("--wav", help="input WAV; default is a synthetic harmonic tone")
    p.add_argument("--params", help="saved model weights (.npz)")
    p.add_argument("--block", type=int, default=0)
    p.add_argument("--frame", type=int, default=0)
    p = sub.add_parser("degrade", parents=[common], help="synthesize degraded copies of a folder of WAVs")
    p.add_argument("--spec", required=True, help="degradation spec JSON file")
    p.add_argument("--clean-dir", required=True)
    p.add_argument("--noise", help="noise WAV; default is seeded white noise")
    sub.add_parser("param-count", parents=[common], help="parameter counts of the presets")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = _run_config(args)
    except (OSError, ValueError) as exc:
        print(f"error: bad run configuration: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    verb = args.verb
    try:
        if verb == "equivcheck":
            report, ok = H.cmd_equivcheck(run)
        elif verb == "gradcheck":
            report, ok = H.cmd_gradcheck(run)
        elif verb == "phase-retrieval":
            curve = []
            report, ok = H.cmd_phase_retrieval(run, args.wav, curve_out=curve)
            _write(out, "loss_curve.csv", H.curve_csv(curve))
        elif verb == "eval":
            report, ok = H.cmd_eval(run, args.manifest, args.params)
        elif verb == "attn-dump":
            text, report = H.cmd_attn_dump(run, args.wav, args.block, args.frame, args.params)
            _write(out, f"attention_block{args.block}_frame{args.frame}.csv", text)
            ok = True
        elif verb == "degrade":
            text, report = H.cmd_degrade(run, Path(args.spec).read_text(), args.clean_dir, out, args.noise)
            _write(out, "manifest.csv", text)
            ok = True
        else:
            report, ok = H.cmd_param_count(run)
    except H.TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    path = _write(out, f"{verb}.json", H.dumps(report))
    print(f"{verb}: {'PASS' if ok else 'FAIL'} -> {path}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
