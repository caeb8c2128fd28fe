"""Comparison artifacts: curve CSV tables, SVG plots, model summary tables.

SVG is the plot format on purpose: it is textual, diffable, and needs no
rendering dependency, so plots can be asserted on in tests byte for byte.
Floats are serialized with Python's shortest round-trip repr, so parsing an
emitted CSV recovers every value exactly.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

from ._util import fmt_float
from .errors import ReportError
from .metrics import CurvePoint, MetricCurve, MetricKind, interval_integral
from .sweep_planner import VariationAxis

CSV_HEADER = ("theta", "model_id", "metric", "estimate", "std", "n_eligible")


def _axis_signature(axis: VariationAxis) -> tuple:
    return (axis.name, axis.unit, axis.grid)


def _require_shared_axis(curves: list[MetricCurve]) -> None:
    signatures = {_axis_signature(c.axis) for c in curves}
    if len(signatures) > 1:
        raise ReportError("curves do not share a variation axis")


def _write_out(text: str, destination) -> int:
    data = text.encode("utf-8")
    if hasattr(destination, "write"):
        destination.write(data if isinstance(destination, io.BufferedIOBase) else text)
    else:
        with open(destination, "wb") as fh:
            fh.write(data)
    return len(data)


# ---------------------------------------------------------------------------
# CSV


def curves_to_csv(curves: list[MetricCurve]) -> str:
    _require_shared_axis(curves)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    rows = []
    for curve in curves:
        for p in curve.points:
            rows.append(
                (
                    p.theta,
                    curve.model_id,
                    curve.kind.label(),
                    "" if p.estimate is None else fmt_float(p.estimate),
                    "" if p.std is None else fmt_float(p.std),
                    p.n_eligible,
                )
            )
    rows.sort(key=lambda r: (r[1], r[0]))
    for theta, model_id, metric, est, std, n in rows:
        writer.writerow((fmt_float(theta), model_id, metric, est, std, n))
    return buf.getvalue()


def emit_curve_csv(curves: list[MetricCurve], destination) -> int:
    """Write curves as CSV (header theta,model_id,metric,estimate,std,
    n_eligible; undefined cells empty; rows sorted by model then theta).
    Returns the byte count written."""
    return _write_out(curves_to_csv(curves), destination)


def parse_curve_csv(text: str) -> list[MetricCurve]:
    """Rebuild curves from an emitted CSV. The variation axis cannot be fully
    recovered from rows alone, so curves come back on a `custom` axis over
    the observed theta grid."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise ReportError("empty CSV input") from None
    if header != CSV_HEADER:
        raise ReportError(f"unexpected CSV header {header!r}")
    grouped: dict[tuple[str, str], list[CurvePoint]] = {}
    for row in reader:
        if not row:
            continue
        theta_s, model_id, metric, est_s, std_s, n_s = row
        grouped.setdefault((model_id, metric), []).append(
            CurvePoint(
                theta=float(theta_s),
                estimate=float(est_s) if est_s else None,
                std=float(std_s) if std_s else None,
                n_eligible=int(n_s),
            )
        )
    curves = []
    for (model_id, metric), points in grouped.items():
        points.sort(key=lambda p: p.theta)
        grid = tuple(p.theta for p in points)
        axis = VariationAxis("custom", "", grid, grid[0])
        curves.append(MetricCurve(axis, model_id, MetricKind.parse_label(metric), points))
    curves.sort(key=lambda c: (c.model_id, c.kind.label()))
    return curves


# ---------------------------------------------------------------------------
# SVG


@dataclass
class CurvePlotSpec:
    curves: list[MetricCurve]
    title: str = ""
    x_label: str = ""
    y_label: str = ""
    error_bars: bool = True
    width: int = 640
    height: int = 400

    def __post_init__(self):
        _require_shared_axis(self.curves)


_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

_MARGIN = {"left": 56, "right": 150, "top": 36, "bottom": 44}


def _plot_geometry(spec: CurvePlotSpec):
    grid = spec.curves[0].axis.grid if spec.curves else (0.0, 1.0)
    x_lo, x_hi = (grid[0], grid[-1]) if len(grid) > 1 else (grid[0] - 0.5, grid[0] + 0.5)
    px_w = spec.width - _MARGIN["left"] - _MARGIN["right"]
    px_h = spec.height - _MARGIN["top"] - _MARGIN["bottom"]

    def sx(x: float) -> float:
        return _MARGIN["left"] + (x - x_lo) / (x_hi - x_lo) * px_w

    def sy(y: float) -> float:  # y axis fixed to [0, 1], origin bottom-left
        return _MARGIN["top"] + (1.0 - y) * px_h

    return (x_lo, x_hi), sx, sy


def _svg_number(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def render_curve_svg(spec: CurvePlotSpec) -> str:
    (x_lo, x_hi), sx, sy = _plot_geometry(spec)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{spec.width}" height="{spec.height}" '
        f'viewBox="0 0 {spec.width} {spec.height}">',
        f'<rect width="{spec.width}" height="{spec.height}" fill="white"/>',
    ]
    if spec.title:
        parts.append(
            f'<text class="title" x="{spec.width // 2}" y="20" text-anchor="middle" '
            f'font-size="14">{escape(spec.title)}</text>'
        )
    # Axes and ticks
    x0, y0, y1 = sx(x_lo), sy(0.0), sy(1.0)
    x1 = sx(x_hi)
    parts.append(
        f'<g class="axes" stroke="black" fill="none">'
        f'<line x1="{_svg_number(x0)}" y1="{_svg_number(y0)}" x2="{_svg_number(x1)}" y2="{_svg_number(y0)}"/>'
        f'<line x1="{_svg_number(x0)}" y1="{_svg_number(y0)}" x2="{_svg_number(x0)}" y2="{_svg_number(y1)}"/>'
        f"</g>"
    )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = sy(frac)
        parts.append(
            f'<line class="ytick" x1="{_svg_number(x0 - 4)}" y1="{_svg_number(y)}" '
            f'x2="{_svg_number(x0)}" y2="{_svg_number(y)}" stroke="black"/>'
            f'<text x="{_svg_number(x0 - 8)}" y="{_svg_number(y + 4)}" text-anchor="end" '
            f'font-size="11">{frac:g}</text>'
        )
    for frac in (0.0, 0.5, 1.0):
        x_val = x_lo + frac * (x_hi - x_lo)
        x = sx(x_val)
        parts.append(
            f'<line class="xtick" x1="{_svg_number(x)}" y1="{_svg_number(y0)}" '
            f'x2="{_svg_number(x)}" y2="{_svg_number(y0 + 4)}" stroke="black"/>'
            f'<text x="{_svg_number(x)}" y="{_svg_number(y0 + 18)}" text-anchor="middle" '
            f'font-size="11">{x_val:g}</text>'
        )
    if spec.x_label:
        parts.append(
            f'<text class="x-label" x="{_svg_number((x0 + x1) / 2)}" '
            f'y="{spec.height - 8}" text-anchor="middle" font-size="12">{escape(spec.x_label)}</text>'
        )
    if spec.y_label:
        cy = (sy(0.0) + sy(1.0)) / 2
        parts.append(
            f'<text class="y-label" x="14" y="{_svg_number(cy)}" text-anchor="middle" '
            f'font-size="12" transform="rotate(-90 14 {_svg_number(cy)})">{escape(spec.y_label)}</text>'
        )

    # Curves: one polyline per contiguous defined run, a marker per defined
    # point, one error-bar path per point with a std (undefined points break
    # the line rather than interpolating through).
    for ci, curve in enumerate(spec.curves):
        color = _PALETTE[ci % len(_PALETTE)]
        runs: list[list[CurvePoint]] = [[]]
        for p in curve.points:
            if p.estimate is None:
                if runs[-1]:
                    runs.append([])
            else:
                runs[-1].append(p)
        parts.append(f'<g class="curve" data-model="{escape(curve.model_id, {chr(34): "&quot;"})}">')
        if spec.error_bars:
            for p in curve.points:
                if p.estimate is None or p.std is None:
                    continue
                x = sx(p.theta)
                top = sy(min(1.0, p.estimate + p.std))
                bot = sy(max(0.0, p.estimate - p.std))
                parts.append(
                    f'<path class="errbar" stroke="{color}" fill="none" d="'
                    f"M {_svg_number(x)} {_svg_number(top)} L {_svg_number(x)} {_svg_number(bot)} "
                    f"M {_svg_number(x - 3)} {_svg_number(top)} L {_svg_number(x + 3)} {_svg_number(top)} "
                    f"M {_svg_number(x - 3)} {_svg_number(bot)} L {_svg_number(x + 3)} {_svg_number(bot)}"
                    '"/>'
                )
        for run in runs:
            if len(run) < 2:
                continue
            coords = " ".join(
                f"{_svg_number(sx(p.theta))},{_svg_number(sy(p.estimate))}" for p in run
            )
            parts.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>'
            )
        for p in curve.points:
            if p.estimate is None:
                continue
            parts.append(
                f'<circle class="marker" cx="{_svg_number(sx(p.theta))}" '
                f'cy="{_svg_number(sy(p.estimate))}" r="2.5" fill="{color}"/>'
            )
        parts.append("</g>")

    # Legend: exactly one entry per input curve.
    lx = spec.width - _MARGIN["right"] + 12
    parts.append('<g class="legend">')
    for ci, curve in enumerate(spec.curves):
        color = _PALETTE[ci % len(_PALETTE)]
        ly = _MARGIN["top"] + 8 + 16 * ci
        parts.append(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="2"/>'
            f'<text class="legend-entry" x="{lx + 24}" y="{ly + 4}" font-size="11">'
            f"{escape(curve.model_id)}</text>"
        )
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_curve_svg(spec: CurvePlotSpec, destination) -> int:
    """Write a standalone SVG plot; returns the byte count written."""
    return _write_out(render_curve_svg(spec), destination)


# ---------------------------------------------------------------------------
# Twin-architecture comparison tables


@dataclass
class ComparisonRow:
    model_id: str
    params: str | None = None
    flops: str | None = None
    cells: dict[str, float | None] = field(default_factory=dict)


@dataclass
class ComparisonTable:
    rows: list[ComparisonRow]
    pairing: list[tuple[str, str]] = field(default_factory=list)
    margins: list[dict[str, float | None]] = field(default_factory=list)  # aligned with pairing


def load_model_registry(text: str | bytes) -> dict[str, dict]:
    """Model metadata (params, flops, train_data) keyed by model_id.

    Pass-through decoration only; nothing here is ever computed from model
    internals."""
    entries = json.loads(text)
    if not isinstance(entries, list):
        raise ReportError("model registry must be a JSON array")
    registry = {}
    for e in entries:
        if "model_id" not in e:
            raise ReportError("model registry entry missing model_id")
        registry[e["model_id"]] = e
    return registry


def compare_models(
    curve_sets: dict[str, MetricCurve],
    interval: tuple[float, float] | None = None,
    pairing: list[tuple[str, str]] | None = None,
    registry: dict[str, dict] | None = None,
) -> ComparisonTable:
    """Summarize one curve per model into a comparison table.

    Per model: mean estimate over defined points, the interval-integral mean
    when an interval is given, and the minimum estimate with its argmin
    theta. Pairs get margin cells (first minus second) for each scalar
    summary; margins are antisymmetric under pair reversal by construction.
    """
    curves = list(curve_sets.values())
    if not curves:
        raise ReportError("no curves to compare")
    _require_shared_axis(curves)
    kinds = {c.kind for c in curves}
    if len(kinds) > 1:
        raise ReportError(f"curves mix metric kinds: {sorted(k.label() for k in kinds)}")
    for model_id, curve in curve_sets.items():
        if curve.model_id != model_id:
            raise ReportError(
                f"curve_sets key {model_id!r} does not match curve model {curve.model_id!r}"
            )

    registry = registry or {}
    rows = []
    for model_id in curve_sets:
        curve = curve_sets[model_id]
        defined = [(p.theta, p.estimate) for p in curve.points if p.estimate is not None]
        cells: dict[str, float | None] = {}
        if defined:
            cells["mean"] = sum(e for _, e in defined) / len(defined)
            min_theta, min_est = min(defined, key=lambda te: (te[1], te[0]))
            cells["min"] = min_est
            cells["argmin_theta"] = min_theta
        else:
            cells["mean"] = cells["min"] = cells["argmin_theta"] = None
        if interval is not None:
            cells["integral"] = interval_integral(curve, interval[0], interval[1])
        meta = registry.get(model_id, {})
        rows.append(
            ComparisonRow(
                model_id=model_id,
                params=meta.get("params"),
                flops=meta.get("flops"),
                cells=cells,
            )
        )

    table = ComparisonTable(rows=rows)
    if pairing:
        by_id = {r.model_id: r for r in rows}
        for a, b in pairing:
            if a not in by_id or b not in by_id:
                raise ReportError(f"pairing references unknown model: ({a!r}, {b!r})")
            margin: dict[str, float | None] = {}
            for key in ("mean", "integral", "min"):
                va, vb = by_id[a].cells.get(key), by_id[b].cells.get(key)
                margin[key] = None if va is None or vb is None else va - vb
            table.pairing.append((a, b))
            table.margins.append(margin)
    return table


def comparison_to_csv(table: ComparisonTable) -> str:
    """CSV rendering: one row per model, then one margin row per pair."""
    have_integral = any("integral" in r.cells for r in table.rows)
    columns = ["model_id", "params", "flops", "mean"]
    if have_integral:
        columns.append("integral")
    columns += ["min", "argmin_theta"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)

    def cell(v) -> str:
        if v is None:
            return ""
        return fmt_float(v) if isinstance(v, float) else str(v)

    for r in table.rows:
        row = [r.model_id, r.params or "", r.flops or "", cell(r.cells.get("mean"))]
        if have_integral:
            row.append(cell(r.cells.get("integral")))
        row += [cell(r.cells.get("min")), cell(r.cells.get("argmin_theta"))]
        writer.writerow(row)
    for (a, b), margin in zip(table.pairing, table.margins):
        row = [f"margin({a}-{b})", "", "", cell(margin.get("mean"))]
        if have_integral:
            row.append(cell(margin.get("integral")))
        row += [cell(margin.get("min")), ""]
        writer.writerow(row)
    return buf.getvalue()
