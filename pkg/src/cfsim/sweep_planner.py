"""Sweep manifests: one variation axis, its grid, reference condition and trials.

A manifest fully specifies one scene-variation sweep: which parameter is
varied (the axis grid), the reference condition every counterfactual
comparison is made against, and the set of trials (object model x lighting
x optional occluder) the sweep runs over. Rendering is out of scope; the
manifest only fixes identities, grids and the frame-id convention that any
image producer and any prediction log must agree on.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .errors import ManifestError

SCHEMA_VERSION = 1

#: Distinguished reference value for occlusion sweeps: the reference frame
#: is a separate render with no occluder in the scene, not a grid position.
ABSENT = "absent"

#: Theta token used for occluder-absent reference frames in enumerations
#: and prediction logs.
REFERENCE_TOKEN = "reference"

AXIS_NAMES = (
    "object_rotation",
    "camera_panorama",
    "object_scale",
    "camera_elevation",
    "occluder_position",
    "custom",
)

#: Axes whose values are angles on a circle; grids must live in [0, 360).
PERIODIC_AXES = ("object_rotation", "camera_panorama")

DEFAULT_FRAME_ID_TEMPLATE = "{trial_id}/{axis}/{index}"

#: Grid index token for the occluder-absent reference frame.
REFERENCE_INDEX_TOKEN = "ref"

DEFAULT_OCCLUDER_POSITIONS = 13

# Object classes available in the simulated kitchen benchmark, with the
# number of distinct object models per class (92 models total).
NVD_CLASS_MODEL_COUNTS = {
    "banana": 7,
    "baseball": 3,
    "cowboy hat, ten-gallon hat": 1,
    "cup": 7,
    "dumbbell": 9,
    "frying pan, frypan, skillet": 3,
    "hammer": 8,
    "ice cream, icecream": 6,
    "laptop, laptop computer": 4,
    "microwave, microwave oven": 1,
    "mouse, computer mouse": 10,
    "orange": 4,
    "pillow": 15,
    "plate": 3,
    "screwdriver": 3,
    "spatula": 3,
    "vase": 5,
}

NVD_LIGHTING_ENV_IDS = tuple(f"hdri_{i:02d}" for i in range(27))

NVD_OCCLUDER_IDS = ("stone_bookend", "red_die", "green_l_block")


def _check_finite(value: float, what: str) -> float:
    v = float(value)
    if v != v or v in (float("inf"), float("-inf")):
        raise ManifestError(f"{what} must be finite, got {value!r}")
    return v


@dataclass(frozen=True)
class VariationAxis:
    """One swept scene parameter: named axis, ordered grid, reference value."""

    name: str
    unit: str
    grid: tuple[float, ...]
    reference: float | str

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ManifestError(f"unknown axis name {self.name!r}; expected one of {AXIS_NAMES}")
        grid = tuple(_check_finite(v, "grid value") for v in self.grid)
        object.__setattr__(self, "grid", grid)
        if not grid:
            raise ManifestError("axis grid must be non-empty")
        for a, b in zip(grid, grid[1:]):
            if not a < b:
                raise ManifestError(f"axis grid must be strictly increasing, got {a} before {b}")
        if self.name in PERIODIC_AXES:
            for v in grid:
                if not (0.0 <= v < 360.0):
                    raise ManifestError(
                        f"{self.name} grid values must lie in [0, 360), got {v}"
                    )
            residues = {v % 360.0 for v in grid}
            if len(residues) != len(grid):
                raise ManifestError(f"{self.name} grid has duplicate values modulo 360")
        if self.reference == ABSENT:
            # Only occlusion sweeps (and user-defined axes) have an
            # off-grid "nothing in the scene" reference; the named
            # geometric axes always have an on-grid ideal condition.
            if self.name not in ("occluder_position", "custom"):
                raise ManifestError(
                    f"axis {self.name!r} cannot use the {ABSENT!r} reference"
                )
            return
        ref = _check_finite(self.reference, "reference")
        object.__setattr__(self, "reference", ref)
        if ref not in grid:
            raise ManifestError(
                f"reference {ref} is not a grid member (and not {ABSENT!r})"
            )

    @property
    def reference_on_grid(self) -> bool:
        return self.reference != ABSENT


@dataclass(frozen=True)
class SceneTrial:
    """Per-trial constants: the object, its lighting, and an optional occluder."""

    trial_id: str
    object_model_id: str
    class_label: str
    lighting_env_id: str
    occluder_id: str | None = None
    unit_scale: float | None = None

    @property
    def identity(self) -> tuple[str, str, str | None]:
        return (self.object_model_id, self.lighting_env_id, self.occluder_id)


@dataclass(frozen=True)
class SweepManifest:
    """A full sweep: axis, trials, constant scene params, labels, frame ids."""

    axis: VariationAxis
    trials: tuple[SceneTrial, ...]
    constants: dict[str, str] = field(default_factory=dict)
    label_set: tuple[str, ...] = ()
    frame_id_template: str = DEFAULT_FRAME_ID_TEMPLATE

    def __post_init__(self):
        trials = tuple(self.trials)
        object.__setattr__(self, "trials", trials)
        if not trials:
            raise ManifestError("manifest requires at least one trial")
        label_set = tuple(self.label_set) or tuple(
            sorted({t.class_label for t in trials})
        )
        object.__setattr__(self, "label_set", label_set)

        seen_ids: set[str] = set()
        seen_identities: set[tuple[str, str, str | None]] = set()
        labels = set(label_set)
        for t in trials:
            if t.trial_id in seen_ids:
                raise ManifestError(f"duplicate trial_id {t.trial_id!r}")
            seen_ids.add(t.trial_id)
            if t.identity in seen_identities:
                raise ManifestError(
                    f"duplicate trial identity {t.identity!r} (object, lighting, occluder)"
                )
            seen_identities.add(t.identity)
            if t.class_label not in labels:
                raise ManifestError(
                    f"trial {t.trial_id!r} label {t.class_label!r} is outside the label set"
                )
        # Frame ids must be collision-free across the whole sweep.
        frame_ids = [f.frame_id for f in enumerate_frames(self, _validate=False)]
        if len(set(frame_ids)) != len(frame_ids):
            raise ManifestError("frame_id_template produces colliding frame ids")

    @property
    def frame_count(self) -> int:
        """|trials| x |grid|, plus one reference frame per trial when the
        reference condition is not on the grid."""
        n = len(self.trials) * len(self.axis.grid)
        if not self.axis.reference_on_grid:
            n += len(self.trials)
        return n

    def frame_id(self, trial_id: str, index: int | str) -> str:
        token = index if isinstance(index, str) else f"{index:03d}"
        return self.frame_id_template.format(
            trial_id=trial_id, axis=self.axis.name, index=token
        )


class Frame(NamedTuple):
    frame_id: str
    trial_id: str
    theta: float | str  # grid value, or REFERENCE_TOKEN for occluder-absent frames


def enumerate_frames(manifest: SweepManifest, _validate: bool = True) -> list[Frame]:
    """List every frame of the sweep in canonical order.

    Trials in declaration order; within a trial the occluder-absent reference
    frame (when the reference is not a grid point) comes first, then grid
    values ascending. Repeated calls return identical output.
    """
    frames: list[Frame] = []
    for trial in manifest.trials:
        if not manifest.axis.reference_on_grid:
            frames.append(
                Frame(
                    manifest.frame_id(trial.trial_id, REFERENCE_INDEX_TOKEN),
                    trial.trial_id,
                    REFERENCE_TOKEN,
                )
            )
        for i, theta in enumerate(manifest.axis.grid):
            frames.append(
                Frame(manifest.frame_id(trial.trial_id, i), trial.trial_id, theta)
            )
    return frames


def _steps(start: float, stop: float, step: float, decimals: int) -> tuple[float, ...]:
    n = round((stop - start) / step)
    return tuple(round(start + i * step, decimals) for i in range(n + 1))


def occluder_position_grid(count: int = DEFAULT_OCCLUDER_POSITIONS) -> tuple[float, ...]:
    """`count` uniformly spaced normalized x positions spanning [-1, 1].

    Odd counts include 0 (occluder directly between camera and object).
    """
    if count < 2:
        raise ManifestError("occluder position grid needs at least 2 positions")
    return tuple((2 * j - (count - 1)) / (count - 1) for j in range(count))


def default_axis(axis_name: str, occluder_positions: int = DEFAULT_OCCLUDER_POSITIONS) -> VariationAxis:
    """The stock axis definition for one of the five benchmark variations.

    Full rotations exclude the 360-degree endpoint (identical pose to 0).
    The occluder-position grid size is configurable because it is not pinned
    by the published dataset arithmetic; the chosen grid is recorded in the
    manifest either way.
    """
    if axis_name == "object_rotation":
        return VariationAxis(axis_name, "degrees", _steps(0, 345, 15, 1), 0.0)
    if axis_name == "camera_panorama":
        return VariationAxis(axis_name, "degrees", _steps(0, 330, 30, 1), 0.0)
    if axis_name == "object_scale":
        return VariationAxis(axis_name, "scale-factor", _steps(0.20, 1.00, 0.05, 2), 1.0)
    if axis_name == "camera_elevation":
        return VariationAxis(axis_name, "degrees", _steps(0, 90, 5, 1), 45.0)
    if axis_name == "occluder_position":
        return VariationAxis(
            axis_name, "normalized-x", occluder_position_grid(occluder_positions), ABSENT
        )
    raise ManifestError(f"no default grid for axis {axis_name!r}")


def plan_axis(
    axis_name: str,
    trials: Sequence[SceneTrial],
    *,
    grid: Sequence[float] | None = None,
    reference: float | str | None = None,
    unit: str | None = None,
    constants: dict[str, str] | None = None,
    label_set: Sequence[str] | None = None,
    frame_id_template: str = DEFAULT_FRAME_ID_TEMPLATE,
    occluder_positions: int = DEFAULT_OCCLUDER_POSITIONS,
) -> SweepManifest:
    """Build a sweep manifest for a named axis.

    Without overrides the five standard axes get their stock grids and
    references (rotation 0..345 step 15 ref 0, panorama 0..330 step 30 ref 0,
    scale 0.20..1.00 step 0.05 ref 1.0, elevation 0..90 step 5 ref 45,
    occluder position spanning [-1, 1] with reference `absent`). A `custom`
    axis requires an explicit grid, reference and unit.
    """
    if axis_name not in AXIS_NAMES:
        raise ManifestError(f"unknown axis name {axis_name!r}; expected one of {AXIS_NAMES}")
    if axis_name == "custom":
        if grid is None or reference is None:
            raise ManifestError("custom axes require an explicit grid and reference")
        axis = VariationAxis("custom", unit or "", tuple(float(v) for v in grid), reference)
    else:
        base = default_axis(axis_name, occluder_positions)
        axis = VariationAxis(
            base.name,
            unit if unit is not None else base.unit,
            tuple(float(v) for v in grid) if grid is not None else base.grid,
            reference if reference is not None else base.reference,
        )
    return SweepManifest(
        axis=axis,
        trials=tuple(trials),
        constants=dict(constants or {}),
        label_set=tuple(label_set) if label_set else (),
        frame_id_template=frame_id_template,
    )


def nvd_default_trials(with_occluders: bool = False) -> list[SceneTrial]:
    """The stock trial set: 92 object models x 27 lighting environments
    (x 3 occluders when `with_occluders`)."""
    models: list[tuple[str, str]] = []
    for label, count in NVD_CLASS_MODEL_COUNTS.items():
        stem = label.split(",")[0].replace(" ", "_")
        for i in range(1, count + 1):
            models.append((f"{stem}_{i:02d}", label))
    occluders: tuple[str | None, ...] = NVD_OCCLUDER_IDS if with_occluders else (None,)
    trials = []
    for model_id, label in models:
        for light in NVD_LIGHTING_ENV_IDS:
            for occ in occluders:
                suffix = f"+{occ}" if occ else ""
                trials.append(
                    SceneTrial(
                        trial_id=f"{model_id}@{light}{suffix}",
                        object_model_id=model_id,
                        class_label=label,
                        lighting_env_id=light,
                        occluder_id=occ,
                    )
                )
    return trials


# ---------------------------------------------------------------------------
# JSON serialization. One UTF-8 document; unknown keys are rejected under
# strict mode, otherwise ignored with a warning.

_MANIFEST_KEYS = {"axis", "trials", "constants", "label_set", "frame_id_template", "schema_version"}
_AXIS_KEYS = {"name", "unit", "grid", "reference"}
_TRIAL_KEYS = {"trial_id", "object_model_id", "class_label", "lighting_env_id", "occluder_id", "unit_scale"}


def manifest_to_dict(manifest: SweepManifest) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "axis": {
            "name": manifest.axis.name,
            "unit": manifest.axis.unit,
            "grid": list(manifest.axis.grid),
            "reference": manifest.axis.reference,
        },
        "trials": [
            {
                "trial_id": t.trial_id,
                "object_model_id": t.object_model_id,
                "class_label": t.class_label,
                "lighting_env_id": t.lighting_env_id,
                "occluder_id": t.occluder_id,
                "unit_scale": t.unit_scale,
            }
            for t in manifest.trials
        ],
        "constants": dict(manifest.constants),
        "label_set": list(manifest.label_set),
        "frame_id_template": manifest.frame_id_template,
    }


def dump_manifest(manifest: SweepManifest) -> str:
    return json.dumps(manifest_to_dict(manifest), indent=2, ensure_ascii=False) + "\n"


def _check_keys(obj: dict, allowed: set[str], where: str, strict: bool) -> None:
    unknown = sorted(set(obj) - allowed)
    if not unknown:
        return
    if strict:
        raise ManifestError(f"unknown {where} keys: {', '.join(unknown)}")
    warnings.warn(f"ignoring unknown {where} keys: {', '.join(unknown)}", stacklevel=3)


def _trial_from_dict(td: dict, strict: bool) -> SceneTrial:
    _check_keys(td, _TRIAL_KEYS, "trial", strict)
    try:
        return SceneTrial(
            trial_id=td["trial_id"],
            object_model_id=td["object_model_id"],
            class_label=td["class_label"],
            lighting_env_id=td["lighting_env_id"],
            occluder_id=td.get("occluder_id"),
            unit_scale=td.get("unit_scale"),
        )
    except KeyError as exc:
        raise ManifestError(f"trial missing required key {exc.args[0]!r}") from None


def manifest_from_dict(doc: dict, strict: bool = False) -> SweepManifest:
    if not isinstance(doc, dict):
        raise ManifestError("manifest document must be a JSON object")
    _check_keys(doc, _MANIFEST_KEYS, "manifest", strict)
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ManifestError(f"unsupported manifest schema_version {version!r}")
    try:
        axis_doc = doc["axis"]
        trial_docs = doc["trials"]
    except KeyError as exc:
        raise ManifestError(f"manifest missing required key {exc.args[0]!r}") from None
    _check_keys(axis_doc, _AXIS_KEYS, "axis", strict)
    try:
        axis = VariationAxis(
            name=axis_doc["name"],
            unit=axis_doc["unit"],
            grid=tuple(axis_doc["grid"]),
            reference=axis_doc["reference"],
        )
    except KeyError as exc:
        raise ManifestError(f"axis missing required key {exc.args[0]!r}") from None
    trials = [_trial_from_dict(td, strict) for td in trial_docs]
    return SweepManifest(
        axis=axis,
        trials=tuple(trials),
        constants=dict(doc.get("constants", {})),
        label_set=tuple(doc.get("label_set", ())),
        frame_id_template=doc.get("frame_id_template", DEFAULT_FRAME_ID_TEMPLATE),
    )


def load_manifest(text: str | bytes, strict: bool = False) -> SweepManifest:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    return manifest_from_dict(doc, strict=strict)


def load_trials(text: str | bytes, strict: bool = False) -> list[SceneTrial]:
    """Parse a JSON array of trial objects (the `--trials` input file)."""
    try:
        docs = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"trials file is not valid JSON: {exc}") from exc
    if not isinstance(docs, list):
        raise ManifestError("trials file must be a JSON array of trial objects")
    return [_trial_from_dict(td, strict) for td in docs]


def dump_trials(trials: Iterable[SceneTrial]) -> str:
    docs = [
        {
            "trial_id": t.trial_id,
            "object_model_id": t.object_model_id,
            "class_label": t.class_label,
            "lighting_env_id": t.lighting_env_id,
            "occluder_id": t.occluder_id,
            "unit_scale": t.unit_scale,
        }
        for t in trials
    ]
    return json.dumps(docs, indent=2, ensure_ascii=False) + "\n"
