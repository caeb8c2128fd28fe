"""Counterfactual and accuracy metrics over trial series.

Every metric is a per-theta mean over the trial population, so estimates are
exact rationals (integer counts divided by integer counts) and two correct
implementations agree to the last bit. Four metrics:

  accuracy  mean of 1(true label in top-k) over trials with a record at theta
  pccp      among trials whose reference prediction is correct, the fraction
            whose prediction is conserved at theta
  pacp      conservation rate over all trials, correct or not, at theta
  pibc      among trials incorrect at the reference, the fraction correct
            at theta

"Correct" and "conserved" depend on the conservation mode. label_retained
(the default for pccp/pibc, and the top-5 convention) asks whether the true
label stays inside the top-k; top1_identity compares top-1 predictions
between the reference and theta records. For pacp, where no correctness
filter exists, top1_identity is the default and label_retained means the
top-k sets share at least one label.

Cells with no eligible trials are explicitly undefined (estimate None),
never silently zero: a silent zero would fabricate a robustness failure.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import Callable, Sequence

from ._util import derive_seed
from .errors import MetricError
from .prediction_log import PredictionRecord, TrialSeries
from .sweep_planner import VariationAxis

METRIC_KIND_NAMES = ("accuracy", "pccp", "pacp", "pibc")
CONSERVATION_MODES = ("label_retained", "top1_identity")

DEFAULT_K = 5
DEFAULT_RESAMPLES = 100

_DEFAULT_MODE = {
    "accuracy": "label_retained",  # ignored; accuracy is always top-k membership
    "pccp": "label_retained",
    "pacp": "top1_identity",
    "pibc": "label_retained",
}


@dataclass(frozen=True)
class MetricKind:
    """Which metric, at which top-k depth, under which conservation mode."""

    kind: str
    k: int = DEFAULT_K
    conservation_mode: str | None = None

    def __post_init__(self):
        if self.kind not in METRIC_KIND_NAMES:
            raise MetricError(f"unknown metric kind {self.kind!r}")
        if self.k < 1:
            raise MetricError(f"k must be >= 1, got {self.k}")
        mode = self.conservation_mode or _DEFAULT_MODE[self.kind]
        if mode not in CONSERVATION_MODES:
            raise MetricError(f"unknown conservation mode {mode!r}")
        object.__setattr__(self, "conservation_mode", mode)

    def label(self) -> str:
        if self.kind == "accuracy":
            return f"accuracy@{self.k}"
        return f"{self.kind}@{self.k}:{self.conservation_mode}"

    @classmethod
    def parse_label(cls, text: str) -> "MetricKind":
        name, _, rest = text.partition("@")
        if not rest:
            return cls(name)
        depth, _, mode = rest.partition(":")
        try:
            k = int(depth)
        except ValueError:
            raise MetricError(f"bad metric label {text!r}") from None
        return cls(name, k, mode or None)


@dataclass(frozen=True)
class CurvePoint:
    theta: float
    estimate: float | None
    std: float | None
    n_eligible: int


@dataclass
class MetricCurve:
    """Per-theta point estimates (and bootstrap stds) for one metric/model."""

    axis: VariationAxis
    model_id: str
    kind: MetricKind
    points: list[CurvePoint]
    diagnostic: str | None = None

    def estimate_at(self, theta: float) -> float | None:
        for p in self.points:
            if p.theta == theta:
                return p.estimate
        raise MetricError(f"theta {theta} is not on the curve grid")


# ---------------------------------------------------------------------------
# Predicates


def _require_k(record: PredictionRecord, k: int) -> None:
    if len(record.topk) < k:
        raise MetricError(
            f"record {record.frame_id!r} has only {len(record.topk)} topk entries, "
            f"metric requires k={k}"
        )


def _is_correct(record: PredictionRecord, true_label: str, kind: MetricKind) -> bool:
    """Correctness at one frame under the kind's conservation mode."""
    if kind.conservation_mode == "top1_identity":
        _require_k(record, 1)
        return record.topk[0][0] == true_label
    _require_k(record, kind.k)
    return true_label in record.labels(kind.k)


def _is_conserved(
    reference: PredictionRecord,
    record: PredictionRecord,
    true_label: str,
    kind: MetricKind,
) -> bool:
    """Prediction conservation between the reference frame and one theta frame."""
    if kind.kind == "pccp":
        if kind.conservation_mode == "top1_identity":
            _require_k(record, 1)
            _require_k(reference, 1)
            return record.topk[0][0] == reference.topk[0][0]
        _require_k(record, kind.k)
        return true_label in record.labels(kind.k)
    if kind.kind == "pacp":
        if kind.conservation_mode == "top1_identity":
            _require_k(record, 1)
            _require_k(reference, 1)
            return record.topk[0][0] == reference.topk[0][0]
        _require_k(record, kind.k)
        _require_k(reference, kind.k)
        return bool(set(record.labels(kind.k)) & set(reference.labels(kind.k)))
    raise MetricError(f"conservation undefined for kind {kind.kind!r}")


# ---------------------------------------------------------------------------
# Curve computation


def _common_axis(series: Sequence[TrialSeries]) -> tuple[VariationAxis, str]:
    if not series:
        raise MetricError("no trial series given")
    axis = series[0].axis
    model_id = series[0].model_id
    for s in series[1:]:
        if s.axis != axis:
            raise MetricError("all series must share one variation axis")
        if s.model_id != model_id:
            raise MetricError(
                f"mixed model ids {model_id!r} and {s.model_id!r}; compute per model"
            )
    return axis, model_id


def _mean_curve(
    series: Sequence[TrialSeries],
    kind: MetricKind,
    eligible: Callable[[TrialSeries], bool],
    value: Callable[[TrialSeries, PredictionRecord], float],
    empty_diagnostic: str | None,
) -> MetricCurve:
    """Shared per-theta estimator: mean of `value` over eligible trials with
    a record at theta."""
    axis, model_id = _common_axis(series)
    flags = [eligible(s) for s in series]
    points = []
    for theta in axis.grid:
        values = [
            value(s, s.variation_records[theta])
            for s, ok in zip(series, flags)
            if ok and theta in s.variation_records
        ]
        if values:
            points.append(CurvePoint(theta, sum(values) / len(values), None, len(values)))
        else:
            points.append(CurvePoint(theta, None, None, 0))
    diagnostic = empty_diagnostic if not any(flags) else None
    return MetricCurve(axis, model_id, kind, points, diagnostic)


def accuracy_curve(series: Sequence[TrialSeries], k: int = DEFAULT_K) -> MetricCurve:
    """Top-k accuracy per theta, averaged over trials with a record there."""
    kind = MetricKind("accuracy", k)

    def value(s: TrialSeries, rec: PredictionRecord) -> float:
        _require_k(rec, k)
        return 1.0 if s.true_label in rec.labels(k) else 0.0

    return _mean_curve(series, kind, lambda s: True, value, None)


def pccp_curve(series: Sequence[TrialSeries], kind: MetricKind | None = None) -> MetricCurve:
    """Proportion of correct conserved predictions.

    Eligibility is decided once per trial at the reference condition; the
    per-theta estimate is the conservation rate over eligible trials that
    have a record at theta. Evaluated at the reference grid point this is
    exactly 1.0. With zero eligible trials the whole curve is undefined and
    carries a diagnostic instead of a silent zero.
    """
    kind = kind or MetricKind("pccp")
    if kind.kind != "pccp":
        raise MetricError(f"pccp_curve called with kind {kind.kind!r}")
    return _mean_curve(
        series,
        kind,
        eligible=lambda s: _is_correct(s.reference_record, s.true_label, kind),
        value=lambda s, rec: 1.0 if _is_conserved(s.reference_record, rec, s.true_label, kind) else 0.0,
        empty_diagnostic="no trial is correct at the reference condition; eligibility set is empty",
    )


def pacp_curve(series: Sequence[TrialSeries], kind: MetricKind | None = None) -> MetricCurve:
    """Proportion of all conserved predictions: no correctness filter, so
    incorrect-but-stable predictions count too."""
    kind = kind or MetricKind("pacp")
    if kind.kind != "pacp":
        raise MetricError(f"pacp_curve called with kind {kind.kind!r}")
    return _mean_curve(
        series,
        kind,
        eligible=lambda s: True,
        value=lambda s, rec: 1.0 if _is_conserved(s.reference_record, rec, s.true_label, kind) else 0.0,
        empty_diagnostic=None,
    )


def pibc_curve(series: Sequence[TrialSeries], kind: MetricKind | None = None) -> MetricCurve:
    """Proportion of incorrect reference predictions that become correct at
    theta. The complement population of pccp: eligibility sets partition the
    trials present at each theta."""
    kind = kind or MetricKind("pibc")
    if kind.kind != "pibc":
        raise MetricError(f"pibc_curve called with kind {kind.kind!r}")
    return _mean_curve(
        series,
        kind,
        eligible=lambda s: not _is_correct(s.reference_record, s.true_label, kind),
        value=lambda s, rec: 1.0 if _is_correct(rec, s.true_label, kind) else 0.0,
        empty_diagnostic="every trial is correct at the reference condition; eligibility set is empty",
    )


def compute_curve(series: Sequence[TrialSeries], kind: MetricKind) -> MetricCurve:
    if kind.kind == "accuracy":
        return accuracy_curve(series, kind.k)
    if kind.kind == "pccp":
        return pccp_curve(series, kind)
    if kind.kind == "pacp":
        return pacp_curve(series, kind)
    if kind.kind == "pibc":
        return pibc_curve(series, kind)
    raise MetricError(f"unknown metric kind {kind.kind!r}")


# ---------------------------------------------------------------------------
# Bootstrap uncertainty


def _trial_values(
    s: TrialSeries, rec: PredictionRecord, kind: MetricKind
) -> tuple[bool, float]:
    """(eligible, indicator value) for one trial at one theta record."""
    if kind.kind == "accuracy":
        _require_k(rec, kind.k)
        return True, 1.0 if s.true_label in rec.labels(kind.k) else 0.0
    if kind.kind == "pccp":
        ok = _is_correct(s.reference_record, s.true_label, kind)
        return ok, 1.0 if ok and _is_conserved(s.reference_record, rec, s.true_label, kind) else 0.0
    if kind.kind == "pacp":
        return True, 1.0 if _is_conserved(s.reference_record, rec, s.true_label, kind) else 0.0
    if kind.kind == "pibc":
        ok = not _is_correct(s.reference_record, s.true_label, kind)
        return ok, 1.0 if ok and _is_correct(rec, s.true_label, kind) else 0.0
    raise MetricError(f"unknown metric kind {kind.kind!r}")


def bootstrap_std(
    series: Sequence[TrialSeries],
    kind: MetricKind,
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
) -> MetricCurve:
    """Point estimates plus per-theta bootstrap standard deviations.

    At each theta the trial population (trials with a record there) is
    resampled with replacement `resamples` times; eligibility is recomputed
    inside each resample for pccp/pibc, so the variability of the eligibility
    filter itself is captured. The reported std is the population standard
    deviation of the resample estimates. Resamples that draw zero eligible
    trials are skipped.

    Randomness is keyed by (seed, metric, sorted trial ids, theta, resample
    index), so outputs are independent of both trial input order and any
    parallelism in the caller.
    """
    if resamples < 1:
        raise MetricError(f"resamples must be >= 1, got {resamples}")
    base = compute_curve(series, kind)
    if base.diagnostic is not None:
        return base
    ordered = sorted(series, key=lambda s: s.trial.trial_id)
    ids_key = ",".join(s.trial.trial_id for s in ordered)

    points: list[CurvePoint] = []
    for point in base.points:
        if point.estimate is None:
            points.append(point)
            continue
        theta = point.theta
        present = [s for s in ordered if theta in s.variation_records]
        cells = [_trial_values(s, s.variation_records[theta], kind) for s in present]
        n = len(present)
        estimates: list[float] = []
        for r in range(resamples):
            rng = random.Random(derive_seed(seed, kind.label(), ids_key, theta, r))
            draws = [rng.randrange(n) for _ in range(n)]
            picked = [cells[i] for i in draws]
            eligible_values = [v for ok, v in picked if ok]
            if eligible_values:
                estimates.append(sum(eligible_values) / len(eligible_values))
        if estimates:
            mean = sum(estimates) / len(estimates)
            var = sum((e - mean) ** 2 for e in estimates) / len(estimates)
            std = math.sqrt(var)
        else:
            std = None
        points.append(replace(point, std=std))
    return MetricCurve(base.axis, base.model_id, base.kind, points, base.diagnostic)


# ---------------------------------------------------------------------------
# Interval summaries


def interval_integral(curve: MetricCurve, lo: float, hi: float) -> float:
    """Trapezoid-rule mean value of the curve over [lo, hi].

    Normalized by the interval length so values are comparable across axes
    with different units. Endpoints falling between grid points are linearly
    interpolated; every grid estimate the rule touches must be defined.
    """
    if not lo < hi:
        raise MetricError(f"degenerate interval [{lo}, {hi}]")
    grid = [p.theta for p in curve.points]
    if lo < grid[0] or hi > grid[-1]:
        raise MetricError(
            f"interval [{lo}, {hi}] exceeds the grid range [{grid[0]}, {grid[-1]}]"
        )
    estimates = {p.theta: p.estimate for p in curve.points}

    def needed(theta: float) -> float:
        est = estimates[theta]
        if est is None:
            raise MetricError(f"estimate undefined at theta {theta} inside the interval")
        return est

    def value_at(x: float) -> float:
        if x in estimates:
            return needed(x)
        below = max(t for t in grid if t < x)
        above = min(t for t in grid if t > x)
        w = (x - below) / (above - below)
        return (1 - w) * needed(below) + w * needed(above)

    xs = [lo] + [t for t in grid if lo < t < hi] + [hi]
    ys = [value_at(x) for x in xs]
    area = sum(
        0.5 * (y0 + y1) * (x1 - x0) for x0, x1, y0, y1 in zip(xs, xs[1:], ys, ys[1:])
    )
    return area / (hi - lo)
