"""`runner` command: evaluate a classifier on every frame of a manifest and
emit a cfsim prediction log."""

from __future__ import annotations

import argparse
import sys

from .inference import InferenceError, RunnerJob, run_inference
from .manifest import ManifestFormatError
from .models import ModelResolutionError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="runner",
        description="Batch inference driver: reads a sweep manifest, evaluates "
        "one pretrained classifier on every referenced image, and writes a "
        "prediction log in the cfsim JSON Lines format.",
    )
    parser.add_argument("--manifest", required=True, help="sweep manifest JSON")
    parser.add_argument("--images", required=True, help="image root; frames resolve to <root>/<frame_id>.png")
    parser.add_argument(
        "--model",
        required=True,
        help="builtin:tiny17 | file:PATH.pt | torchvision:NAME",
    )
    parser.add_argument("--k", type=int, default=5, help="top-k depth (default 5)")
    parser.add_argument("--out", required=True, help="prediction log destination (.jsonl)")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    job = None
    try:
        job = RunnerJob(
            manifest_path=args.manifest,
            image_root=args.images,
            model_name=args.model,
            out_path=args.out,
            k=args.k,
            batch_size=args.batch_size,
            device=args.device,
        )
        out = run_inference(job)
    except ModelResolutionError as exc:
        print(f"runner: model {args.model!r}: {exc}", file=sys.stderr)
        return 1
    except (InferenceError, ManifestFormatError) as exc:
        print(f"runner: {exc}", file=sys.stderr)
        return 1
    print(f"runner: wrote {out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
