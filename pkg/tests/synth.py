"""Synthetic fixtures: random oracle logs and a deterministic toy model.

`random_plain_log` builds the plain-dict shape consumed by tests/oracles.py;
`plain_log_to_library` converts the same data mechanically into a manifest
plus prediction records for the implementation under test, so both sides see
identical inputs.
"""

from __future__ import annotations

import random

from cfsim.prediction_log import PredictionRecord
from cfsim.sweep_planner import (
    REFERENCE_TOKEN,
    SceneTrial,
    SweepManifest,
    enumerate_frames,
    plan_axis,
)

LABEL_ALPHABET = (
    "banana", "cup", "hammer", "plate", "vase", "orange", "pillow", "spatula",
)


def random_plain_log(
    rng: random.Random,
    max_trials: int = 10,
    max_thetas: int = 10,
    k_depth: int = 5,
    hole_rate: float = 0.15,
) -> dict:
    n_theta = rng.randint(1, max_thetas)
    grid = [float(v) for v in sorted(rng.sample(range(0, 120), n_theta))]
    reference = "absent" if rng.random() < 0.3 else rng.choice(grid)
    trials = []
    for i in range(rng.randint(1, max_trials)):
        preds: dict = {}
        ref_key = "reference" if reference == "absent" else reference
        preds[ref_key] = rng.sample(LABEL_ALPHABET, k_depth)
        for theta in grid:
            if theta == ref_key:
                continue  # reference grid cell already filled
            if rng.random() < hole_rate:
                continue
            preds[theta] = rng.sample(LABEL_ALPHABET, k_depth)
        trials.append(
            {
                "trial_id": f"trial_{i:02d}",
                "true_label": rng.choice(LABEL_ALPHABET),
                "preds": preds,
            }
        )
    return {"grid": grid, "reference": reference, "trials": trials}


def plain_log_to_library(
    plain: dict, model_id: str = "net"
) -> tuple[SweepManifest, list[PredictionRecord]]:
    trials = [
        SceneTrial(
            trial_id=t["trial_id"],
            object_model_id=t["trial_id"],
            class_label=t["true_label"],
            lighting_env_id="light_00",
        )
        for t in plain["trials"]
    ]
    manifest = plan_axis(
        "custom",
        trials,
        grid=plain["grid"],
        reference=plain["reference"],
        unit="steps",
        label_set=sorted(LABEL_ALPHABET),
    )
    theta_to_index = {theta: i for i, theta in enumerate(manifest.axis.grid)}
    records = []
    for t in plain["trials"]:
        for key, labels in t["preds"].items():
            if key == "reference":
                frame_id = manifest.frame_id(t["trial_id"], "ref")
                theta: float | str = REFERENCE_TOKEN
            else:
                frame_id = manifest.frame_id(t["trial_id"], theta_to_index[key])
                theta = key
            topk = tuple((label, 1.0 - 0.1 * i) for i, label in enumerate(labels))
            records.append(
                PredictionRecord(
                    frame_id=frame_id,
                    trial_id=t["trial_id"],
                    theta=theta,
                    model_id=model_id,
                    topk=topk,
                )
            )
    return manifest, records


def random_records(rng: random.Random, count: int) -> list[PredictionRecord]:
    """Arbitrary valid records for serialization round-trip tests."""
    records = []
    for i in range(count):
        k = rng.randint(1, 7)
        labels = rng.sample(LABEL_ALPHABET, k)
        scores = sorted((rng.uniform(-20, 20) for _ in range(k)), reverse=True)
        theta: float | str = (
            REFERENCE_TOKEN if rng.random() < 0.2 else round(rng.uniform(-360, 360), 4)
        )
        records.append(
            PredictionRecord(
                frame_id=f"trial_{i}/custom/{rng.randint(0, 999):03d}",
                trial_id=f"trial_{i}",
                theta=theta,
                model_id=rng.choice(("convnext-t", "swin-t", "net éè")),
                topk=tuple(zip(labels, scores)),
            )
        )
    return records


def degradation_log(
    manifest: SweepManifest, model_ids: list[str], seed: int = 0, k: int = 5
) -> list[PredictionRecord]:
    """Deterministic toy classifier: correctness probability decays with the
    normalized distance from the reference condition, at a per-model rate."""
    grid = manifest.axis.grid
    span = (grid[-1] - grid[0]) or 1.0
    if manifest.axis.reference_on_grid:
        ref_value = manifest.axis.reference
    else:
        ref_value = grid[0]
    records = []
    for mi, model_id in enumerate(model_ids):
        robustness = 0.9 - 0.25 * mi
        for frame in enumerate_frames(manifest):
            trial = next(t for t in manifest.trials if t.trial_id == frame.trial_id)
            rng = random.Random(f"{seed}:{model_id}:{frame.frame_id}")
            if frame.theta == REFERENCE_TOKEN:
                p_correct = 0.95
            else:
                dist = abs(frame.theta - ref_value) / span
                p_correct = max(0.05, 0.95 - (1.0 - robustness) * 2.0 * dist)
            others = [l for l in manifest.label_set if l != trial.class_label]
            while len(others) < k:
                others = others + [f"distractor_{len(others)}"]
            rng.shuffle(others)
            ranked = others[: k - 1]
            position = 0 if rng.random() < p_correct else rng.randrange(1, k + 3)
            if position < k:
                ranked.insert(position, trial.class_label)
                ranked = ranked[:k]
            else:
                ranked = (ranked + others[k - 1 :])[:k]
            topk = tuple((label, round(1.0 - 0.13 * i, 6)) for i, label in enumerate(ranked))
            records.append(
                PredictionRecord(
                    frame_id=frame.frame_id,
                    trial_id=frame.trial_id,
                    theta=frame.theta,
                    model_id=model_id,
                    topk=topk,
                )
            )
    return records
