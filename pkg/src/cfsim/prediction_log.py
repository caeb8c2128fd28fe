"""Prediction-log wire format: parsing, validation, and the trial-series join.

The log is UTF-8 JSON Lines; one object per line with keys `frame_id`,
`trial_id`, `theta` (number or the string "reference"), `model_id`, `topk`
(array of [label, score] pairs, scores descending) and an optional
`schema_version`. This is the contract between the measurement side and any
model runner. Lines whose `trial_id` is "__meta__" are provenance headers
emitted by runners; they parse as ordinary records but are excluded from
validation and joining.

Scores are opaque: only the ranking ever feeds a metric, so logits and
probabilities are equally acceptable and are preserved exactly as written.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import LogParseError, SeriesError
from .sweep_planner import (
    REFERENCE_TOKEN,
    SceneTrial,
    SweepManifest,
    VariationAxis,
    enumerate_frames,
)

LOG_SCHEMA_VERSION = 1

#: trial_id marking a runner provenance header record.
META_TRIAL_ID = "__meta__"

_RECORD_KEYS = ("frame_id", "trial_id", "theta", "model_id", "topk")


@dataclass(frozen=True)
class PredictionRecord:
    """One model inference result: frame identity plus ranked top-k output."""

    frame_id: str
    trial_id: str
    theta: float | str
    model_id: str
    topk: tuple[tuple[str, float], ...]

    @property
    def is_meta(self) -> bool:
        return self.trial_id == META_TRIAL_ID

    def labels(self, k: int | None = None) -> tuple[str, ...]:
        entries = self.topk if k is None else self.topk[:k]
        return tuple(label for label, _ in entries)


def _record_from_obj(obj: dict, line: int) -> PredictionRecord:
    if not isinstance(obj, dict):
        raise LogParseError("record is not a JSON object", line)
    for key in _RECORD_KEYS:
        if key not in obj:
            raise LogParseError(f"missing required field {key!r}", line)
    theta = obj["theta"]
    if isinstance(theta, str):
        if theta != REFERENCE_TOKEN:
            raise LogParseError(
                f"theta must be a number or {REFERENCE_TOKEN!r}, got {theta!r}", line
            )
    elif isinstance(theta, (int, float)) and not isinstance(theta, bool):
        theta = float(theta)
        if not math.isfinite(theta):
            raise LogParseError(f"theta must be finite, got {theta!r}", line)
    else:
        raise LogParseError(f"theta must be a number or {REFERENCE_TOKEN!r}", line)

    raw_topk = obj["topk"]
    if not isinstance(raw_topk, list) or not raw_topk:
        raise LogParseError("topk must be a non-empty array", line)
    topk: list[tuple[str, float]] = []
    seen_labels: set[str] = set()
    prev_score: float | None = None
    for entry in raw_topk:
        if not isinstance(entry, (list, tuple)) or len(entry) != 2:
            raise LogParseError("each topk entry must be a [label, score] pair", line)
        label, score = entry
        if not isinstance(label, str):
            raise LogParseError(f"topk label must be a string, got {label!r}", line)
        if isinstance(score, bool) or not isinstance(score, (int, float)):
            raise LogParseError(f"topk score must be a number, got {score!r}", line)
        score = float(score)
        if not math.isfinite(score):
            raise LogParseError(f"topk score must be finite, got {score!r}", line)
        if label in seen_labels:
            raise LogParseError(f"duplicate class label {label!r} within topk", line)
        seen_labels.add(label)
        if prev_score is not None and score > prev_score:
            raise LogParseError("topk scores must be non-increasing", line)
        prev_score = score
        topk.append((label, score))
    return PredictionRecord(
        frame_id=str(obj["frame_id"]),
        trial_id=str(obj["trial_id"]),
        theta=theta,
        model_id=str(obj["model_id"]),
        topk=tuple(topk),
    )


@dataclass
class ParseResult:
    records: list[PredictionRecord]
    errors: list[LogParseError] = field(default_factory=list)


def parse_log(source: bytes | str | io.IOBase, *, strict: bool = True) -> ParseResult:
    """Parse a JSON Lines prediction log.

    Strict mode raises on the first malformed line (CI use); lenient mode
    collects every error and returns the lines that did parse (exploratory
    use). Line numbers in errors are 1-based. Empty lines are skipped.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    records: list[PredictionRecord] = []
    errors: list[LogParseError] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogParseError(f"malformed JSON: {exc.msg}", lineno) from None
            records.append(_record_from_obj(obj, lineno))
        except LogParseError as err:
            if strict:
                raise
            errors.append(err)
    return ParseResult(records=records, errors=errors)


def serialize_records(records: Iterable[PredictionRecord]) -> str:
    """Render records as JSON Lines; parse_log(serialize_records(r)) == r."""
    lines = []
    for r in records:
        obj = {
            "frame_id": r.frame_id,
            "trial_id": r.trial_id,
            "theta": r.theta,
            "model_id": r.model_id,
            "topk": [[label, score] for label, score in r.topk],
            "schema_version": LOG_SCHEMA_VERSION,
        }
        lines.append(json.dumps(obj, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Validation against a manifest


@dataclass
class ValidationReport:
    """Everything wrong (or missing) in a log relative to a manifest.

    Nothing here raises: problems are entries. Duplicates, unknown frames and
    frame/identity mismatches are fatal; label-set violations are warnings
    because real classifiers legitimately predict distractor classes outside
    the sweep's label set.
    """

    missing: list[tuple[str, str, float | str]] = field(default_factory=list)  # model, trial, theta
    unknown_frames: list[tuple[str, str]] = field(default_factory=list)  # frame_id, reason
    duplicates: list[tuple[str, str]] = field(default_factory=list)  # frame_id, model_id
    label_warnings: list[tuple[str, str]] = field(default_factory=list)  # frame_id, label
    completeness: dict[tuple[str, str], float] = field(default_factory=dict)  # (model, trial) -> fraction

    @property
    def is_fatal(self) -> bool:
        return bool(self.duplicates or self.unknown_frames)

    @property
    def overall_completeness(self) -> float:
        if not self.completeness:
            return 0.0
        return sum(self.completeness.values()) / len(self.completeness)

    def to_dict(self) -> dict:
        return {
            "is_fatal": self.is_fatal,
            "missing": [
                {"model_id": m, "trial_id": t, "theta": th} for m, t, th in self.missing
            ],
            "unknown_frames": [
                {"frame_id": f, "reason": r} for f, r in self.unknown_frames
            ],
            "duplicates": [
                {"frame_id": f, "model_id": m} for f, m in self.duplicates
            ],
            "label_warnings": [
                {"frame_id": f, "label": l} for f, l in self.label_warnings
            ],
            "completeness": [
                {"model_id": m, "trial_id": t, "fraction": v}
                for (m, t), v in sorted(self.completeness.items())
            ],
            "overall_completeness": self.overall_completeness,
        }


def validate_against_manifest(
    records: Sequence[PredictionRecord], manifest: SweepManifest
) -> ValidationReport:
    """Check a parsed log against the manifest's frame universe.

    Reports, per model: missing (trial, theta) cells, unknown or inconsistent
    frame ids, duplicate (frame_id, model_id) pairs, out-of-label-set topk
    labels, and a per-trial completeness fraction.
    """
    frames = enumerate_frames(manifest)
    frame_info = {f.frame_id: (f.trial_id, f.theta) for f in frames}
    label_set = set(manifest.label_set)

    report = ValidationReport()
    seen: dict[tuple[str, str], set[float | str]] = {}
    seen_frame_model: set[tuple[str, str]] = set()
    models: list[str] = []

    for r in records:
        if r.is_meta:
            continue
        if r.model_id not in models:
            models.append(r.model_id)
        info = frame_info.get(r.frame_id)
        if info is None:
            report.unknown_frames.append((r.frame_id, "not generated by this manifest"))
            continue
        trial_id, theta = info
        if r.trial_id != trial_id or r.theta != theta:
            report.unknown_frames.append(
                (
                    r.frame_id,
                    f"manifest assigns trial {trial_id!r} theta {theta!r}, "
                    f"record claims trial {r.trial_id!r} theta {r.theta!r}",
                )
            )
            continue
        key = (r.frame_id, r.model_id)
        if key in seen_frame_model:
            report.duplicates.append(key)
            continue
        seen_frame_model.add(key)
        seen.setdefault((r.model_id, trial_id), set()).add(theta)
        for label in r.labels():
            if label not in label_set:
                report.label_warnings.append((r.frame_id, label))

    per_trial_frames: dict[str, list[float | str]] = {}
    for f in frames:
        per_trial_frames.setdefault(f.trial_id, []).append(f.theta)

    for model_id in models:
        for trial in manifest.trials:
            expected = per_trial_frames[trial.trial_id]
            present = seen.get((model_id, trial.trial_id), set())
            for theta in expected:
                if theta not in present:
                    report.missing.append((model_id, trial.trial_id, theta))
            report.completeness[(model_id, trial.trial_id)] = len(present) / len(expected)
    return report


# ---------------------------------------------------------------------------
# The per-trial join that makes every counterfactual metric computable


@dataclass
class TrialSeries:
    """All records of one (model, trial), joined with the reference record."""

    trial: SceneTrial
    model_id: str
    true_label: str
    reference_record: PredictionRecord
    variation_records: dict[float, PredictionRecord]
    axis: VariationAxis


@dataclass
class SeriesBuildResult:
    series: list[TrialSeries]
    missing_reference: list[tuple[str, str]]  # (model_id, trial_id) excluded


def build_trial_series(
    records: Sequence[PredictionRecord], manifest: SweepManifest
) -> SeriesBuildResult:
    """Join records into one TrialSeries per (model, trial) with a reference.

    Requires a log free of fatal validation problems. Trials lacking their
    reference record are excluded and reported; an entirely empty result is
    an error because every downstream metric is undefined without references.
    Output order is (model_id, trial declaration order), independent of the
    record order in the log.
    """
    frame_info = {f.frame_id: (f.trial_id, f.theta) for f in enumerate_frames(manifest)}
    trial_by_id = {t.trial_id: t for t in manifest.trials}
    axis = manifest.axis

    by_key: dict[tuple[str, str], dict[float | str, PredictionRecord]] = {}
    for r in records:
        if r.is_meta:
            continue
        info = frame_info.get(r.frame_id)
        if info is None:
            raise SeriesError(
                f"unknown frame_id {r.frame_id!r}; run validation before joining"
            )
        trial_id, theta = info
        cell = by_key.setdefault((r.model_id, trial_id), {})
        if theta in cell:
            raise SeriesError(
                f"duplicate record for frame {r.frame_id!r} model {r.model_id!r}"
            )
        cell[theta] = r

    models = sorted({model_id for model_id, _ in by_key})
    result = SeriesBuildResult(series=[], missing_reference=[])
    for model_id in models:
        for trial in manifest.trials:
            cell = by_key.get((model_id, trial.trial_id))
            if cell is None:
                continue
            if axis.reference_on_grid:
                reference = cell.get(axis.reference)
            else:
                reference = cell.get(REFERENCE_TOKEN)
            if reference is None:
                result.missing_reference.append((model_id, trial.trial_id))
                continue
            variation = {
                theta: rec for theta, rec in cell.items() if isinstance(theta, float)
            }
            result.series.append(
                TrialSeries(
                    trial=trial,
                    model_id=model_id,
                    true_label=trial.class_label,
                    reference_record=reference,
                    variation_records=dict(sorted(variation.items())),
                    axis=axis,
                )
            )
    if not result.series:
        raise SeriesError("no trial has a reference record; metrics are undefined")
    return result
