"""Batched deterministic inference over every frame of a sweep manifest.

Output is the prediction-log JSON Lines contract: a provenance header record
first (trial_id "__meta__", carrying the preprocessing recipe and effective
input size), then one record per frame in manifest enumeration order, each
with the model's top-k labels and post-softmax probabilities in descending
order. Tie-breaking within equal scores follows torch's sort order and is
owned by this runner.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch
from PIL import Image

from .manifest import FrameRef, ManifestView, load_manifest_view
from .models import ResolvedModel, resolve_model

LOG_SCHEMA_VERSION = 1
META_TRIAL_ID = "__meta__"


class InferenceError(Exception):
    pass


@dataclass
class RunnerJob:
    manifest_path: str
    image_root: str
    model_name: str
    out_path: str
    k: int = 5
    batch_size: int = 16
    device: str = "cpu"

    def __post_init__(self):
        if self.k < 1:
            raise InferenceError(f"k must be >= 1, got {self.k}")
        if self.batch_size < 1:
            raise InferenceError(f"batch_size must be >= 1, got {self.batch_size}")


def _frame_image_path(root: Path, frame: FrameRef) -> Path:
    return root / (frame.frame_id + ".png")


def _check_images(root: Path, frames: list[FrameRef]) -> None:
    missing = [f.frame_id for f in frames if not _frame_image_path(root, f).is_file()]
    if missing:
        shown = ", ".join(missing[:5])
        more = f" (+{len(missing) - 5} more)" if len(missing) > 5 else ""
        raise InferenceError(f"missing image files for frames: {shown}{more}")


def _meta_record(model: ResolvedModel, job: RunnerJob) -> dict:
    return {
        "frame_id": META_TRIAL_ID,
        "trial_id": META_TRIAL_ID,
        "theta": "reference",
        "model_id": model.name,
        "topk": [[META_TRIAL_ID, 0.0]],
        "schema_version": LOG_SCHEMA_VERSION,
        "preprocess": dict(model.preprocess_info, k=job.k, batch_size=job.batch_size),
    }


def run_inference(job: RunnerJob) -> Path:
    """Evaluate every manifest frame and write the prediction log.

    Deterministic by construction: fixed seed, eval mode, no augmentation,
    frames batched in enumeration order. Fails fast on unresolvable models
    and missing or undecodable images, naming the frame."""
    model = resolve_model(job.model_name)
    if job.k > len(model.labels):
        raise InferenceError(
            f"k={job.k} exceeds the {len(model.labels)}-class output of {model.name}"
        )
    view: ManifestView = load_manifest_view(job.manifest_path)
    frames = view.frames()
    root = Path(job.image_root)
    if not root.is_dir():
        raise InferenceError(f"image root is not a directory: {root}")
    _check_images(root, frames)

    torch.manual_seed(0)
    device = torch.device(job.device)
    module = model.module.to(device)
    module.eval()

    lines = [json.dumps(_meta_record(model, job), ensure_ascii=False)]
    with torch.no_grad():
        for start in range(0, len(frames), job.batch_size):
            batch = frames[start : start + job.batch_size]
            tensors = []
            for frame in batch:
                path = _frame_image_path(root, frame)
                try:
                    with Image.open(path) as img:
                        tensors.append(model.preprocess(img))
                except InferenceError:
                    raise
                except Exception as exc:
                    raise InferenceError(
                        f"cannot decode image for frame {frame.frame_id!r}: {exc}"
                    ) from exc
            logits = module(torch.stack(tensors).to(device))
            probs = torch.softmax(logits, dim=1)
            scores, indices = torch.topk(probs, job.k, dim=1)
            for frame, frame_scores, frame_indices in zip(batch, scores, indices):
                topk = [
                    [model.labels[int(i)], float(s)]
                    for s, i in zip(frame_scores, frame_indices)
                ]
                lines.append(
                    json.dumps(
                        {
                            "frame_id": frame.frame_id,
                            "trial_id": frame.trial_id,
                            "theta": frame.theta,
                            "model_id": model.name,
                            "topk": topk,
                            "schema_version": LOG_SCHEMA_VERSION,
                        },
                        ensure_ascii=False,
                    )
                )
    out = Path(job.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out
