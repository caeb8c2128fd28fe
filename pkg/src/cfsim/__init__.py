"""Counterfactual robustness testing: sweep planning, prediction-conservation
metrics with bootstrap uncertainty, patch-drop occlusion, comparison reports."""

__version__ = "0.1.0"

from .errors import (
    CfsimError,
    LogParseError,
    ManifestError,
    MetricError,
    PatchDropError,
    ReportError,
    SeriesError,
)
from .metrics import (
    MetricCurve,
    MetricKind,
    accuracy_curve,
    bootstrap_std,
    compute_curve,
    interval_integral,
    pacp_curve,
    pccp_curve,
    pibc_curve,
)
from .patch_drop import PatchDropSpec, RasterImage, drop_patches, schedule
from .prediction_log import (
    PredictionRecord,
    TrialSeries,
    build_trial_series,
    parse_log,
    serialize_records,
    validate_against_manifest,
)
from .report import (
    ComparisonTable,
    CurvePlotSpec,
    compare_models,
    emit_curve_csv,
    emit_curve_svg,
    parse_curve_csv,
)
from .sweep_planner import (
    ABSENT,
    SceneTrial,
    SweepManifest,
    VariationAxis,
    dump_manifest,
    enumerate_frames,
    load_manifest,
    nvd_default_trials,
    plan_axis,
)
