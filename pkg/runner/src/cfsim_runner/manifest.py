"""Read-only view of the sweep-manifest wire format.

Implements only what a runner needs from the JSON contract: trials, the
axis grid/reference, and the frame-id convention (template formatted with
the trial id, the axis name and either a 3-wide zero-padded grid index or
the literal token `ref` for the occluder-absent reference frame). Frames
enumerate in the canonical order: trials in declaration order, reference
frame first, then grid ascending.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

REFERENCE_THETA = "reference"
SUPPORTED_SCHEMA_VERSION = 1


class ManifestFormatError(Exception):
    pass


@dataclass(frozen=True)
class FrameRef:
    frame_id: str
    trial_id: str
    theta: float | str  # grid value or "reference"


@dataclass
class ManifestView:
    axis_name: str
    grid: list[float]
    reference: float | str
    trial_ids: list[str]
    frame_id_template: str

    @property
    def reference_on_grid(self) -> bool:
        return self.reference != "absent"

    def frame_id(self, trial_id: str, index: int | str) -> str:
        token = index if isinstance(index, str) else f"{index:03d}"
        return self.frame_id_template.format(
            trial_id=trial_id, axis=self.axis_name, index=token
        )

    def frames(self) -> list[FrameRef]:
        out: list[FrameRef] = []
        for trial_id in self.trial_ids:
            if not self.reference_on_grid:
                out.append(FrameRef(self.frame_id(trial_id, "ref"), trial_id, REFERENCE_THETA))
            for i, theta in enumerate(self.grid):
                out.append(FrameRef(self.frame_id(trial_id, i), trial_id, theta))
        return out


def load_manifest_view(path: str | Path) -> ManifestView:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestFormatError(f"cannot read manifest {path}: {exc}") from exc
    version = doc.get("schema_version", SUPPORTED_SCHEMA_VERSION)
    if version != SUPPORTED_SCHEMA_VERSION:
        raise ManifestFormatError(f"unsupported manifest schema_version {version!r}")
    try:
        axis = doc["axis"]
        return ManifestView(
            axis_name=axis["name"],
            grid=[float(v) for v in axis["grid"]],
            reference=axis["reference"],
            trial_ids=[t["trial_id"] for t in doc["trials"]],
            frame_id_template=doc.get("frame_id_template", "{trial_id}/{axis}/{index}"),
        )
    except KeyError as exc:
        raise ManifestFormatError(f"manifest missing key {exc.args[0]!r}") from None
