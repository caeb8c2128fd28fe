from __future__ import annotations

import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def write_manifest(path: Path, trial_ids, grid, reference, label="banana"):
    doc = {
        "schema_version": 1,
        "axis": {"name": "custom", "unit": "steps", "grid": list(grid), "reference": reference},
        "trials": [
            {
                "trial_id": tid,
                "object_model_id": f"obj_{tid}",
                "class_label": label,
                "lighting_env_id": "hdri_00",
                "occluder_id": None,
                "unit_scale": None,
            }
            for tid in trial_ids
        ],
        "constants": {},
        "label_set": [label, "cup", "plate"],
        "frame_id_template": "{trial_id}/{axis}/{index}",
    }
    path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
    return doc


def frame_ids(doc) -> list[str]:
    template = doc["frame_id_template"]
    axis = doc["axis"]["name"]
    ids = []
    for trial in doc["trials"]:
        if doc["axis"]["reference"] == "absent":
            ids.append(template.format(trial_id=trial["trial_id"], axis=axis, index="ref"))
        for i in range(len(doc["axis"]["grid"])):
            ids.append(template.format(trial_id=trial["trial_id"], axis=axis, index=f"{i:03d}"))
    return ids


def write_frame_images(root: Path, ids, size=64):
    for n, frame_id in enumerate(ids):
        rng = np.random.default_rng(n)
        px = rng.integers(0, 255, size=(size, size, 3), dtype=np.uint8)
        path = root / (frame_id + ".png")
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(px).save(path)


@pytest.fixture
def toy_sweep(tmp_path):
    """5-frame sweep: one trial, five grid values, reference on the grid."""
    manifest_path = tmp_path / "manifest.json"
    doc = write_manifest(manifest_path, ["t0"], [0.0, 1.0, 2.0, 3.0, 4.0], 0.0)
    images = tmp_path / "images"
    write_frame_images(images, frame_ids(doc))
    return manifest_path, images, tmp_path


def cfsim_command() -> list[str]:
    exe = shutil.which("cfsim")
    if exe:
        return [exe]
    return [sys.executable, "-m", "cfsim.cli"]


def run_cfsim(args: list[str], cwd: Path) -> subprocess.CompletedProcess:
    return subprocess.run(
        cfsim_command() + args, cwd=cwd, capture_output=True, text=True, timeout=120
    )
