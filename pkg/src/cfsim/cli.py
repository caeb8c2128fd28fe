"""Command-line entry point: plan / validate / score / patchdrop / report / compare.

Every run writes a `run.json` provenance sidecar next to its primary output,
capturing the resolved config, SHA-256 digests of all inputs and the tool
version. Counterfactual comparisons are only meaningful when both sides'
configs are auditable, so the sidecar is mandatory, not opt-in. Sidecars
contain no timestamps: identical configs and inputs must produce
byte-identical artifacts.

Exit codes: 0 success, 1 validation/data failures, 2 usage errors.
`CFSIM_THREADS` caps internal parallelism (0 = auto); outputs never depend
on the thread count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from ._util import derive_seed, file_sha256
from .errors import CfsimError
from .metrics import (
    DEFAULT_K,
    DEFAULT_RESAMPLES,
    CONSERVATION_MODES,
    METRIC_KIND_NAMES,
    MetricKind,
    bootstrap_std,
)
from .patch_drop import (
    DEFAULT_LEVELS,
    DEFAULT_PATCH_SIZE,
    PatchDropSpec,
    drop_patches,
    read_png,
    select_patches,
    write_png,
)
from .prediction_log import build_trial_series, parse_log, validate_against_manifest
from .report import (
    CurvePlotSpec,
    compare_models,
    comparison_to_csv,
    emit_curve_csv,
    emit_curve_svg,
    load_model_registry,
    parse_curve_csv,
)
from .sweep_planner import (
    AXIS_NAMES,
    DEFAULT_OCCLUDER_POSITIONS,
    dump_manifest,
    load_manifest,
    load_trials,
    plan_axis,
)


class UsageError(Exception):
    """Bad invocation (missing files, conflicting flags) -> exit 2."""


@dataclass
class RunConfig:
    """Resolved invocation, as recorded in the provenance sidecar."""

    subcommand: str
    options: dict
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)


def thread_count() -> int:
    raw = os.environ.get("CFSIM_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"CFSIM_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise UsageError(f"CFSIM_THREADS must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def _parallel_map(fn, items):
    """Order-preserving map, threaded when CFSIM_THREADS allows."""
    items = list(items)
    workers = min(thread_count(), max(len(items), 1))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _read_input(path: str) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file not found: {path}")
    return p.read_bytes()


def _write_text(path: str, text: str) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")


def _write_run_json(config: RunConfig) -> None:
    digests = {path: file_sha256(path) for path in sorted(set(config.inputs))}
    doc = {
        "tool": "cfsim",
        "version": __version__,
        "subcommand": config.subcommand,
        "config": config.options,
        "input_digests": digests,
        "outputs": sorted(config.outputs),
    }
    out_dir = Path(config.outputs[0]).parent if config.outputs else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _options(args: argparse.Namespace) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_plan(args) -> int:
    trials = load_trials(_read_input(args.trials), strict=args.strict)
    grid = [float(v) for v in args.grid.split(",")] if args.grid else None
    reference: float | str | None = None
    if args.reference is not None:
        reference = args.reference if args.reference == "absent" else float(args.reference)
    constants = {}
    for item in args.constant or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--constant expects key=value, got {item!r}")
        constants[key] = value
    manifest = plan_axis(
        args.axis,
        trials,
        grid=grid,
        reference=reference,
        unit=args.unit,
        constants=constants,
        occluder_positions=args.positions,
    )
    _write_text(args.out, dump_manifest(manifest))
    _write_run_json(RunConfig("plan", _options(args), [args.trials], [args.out]))
    print(
        f"planned {manifest.axis.name}: {len(manifest.axis.grid)} grid values, "
        f"{len(manifest.trials)} trials, {manifest.frame_count} frames -> {args.out}",
        file=sys.stderr,
    )
    return 0


def _cmd_validate(args) -> int:
    manifest = load_manifest(_read_input(args.manifest), strict=args.strict)
    parsed = parse_log(_read_input(args.log), strict=args.strict)
    report = validate_against_manifest(parsed.records, manifest)
    doc = report.to_dict()
    doc["parse_errors"] = [str(e) for e in parsed.errors]
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        _write_text(args.out, text)
    else:
        print(text, end="")
    _write_run_json(
        RunConfig(
            "validate",
            _options(args),
            [args.manifest, args.log],
            [args.out] if args.out else [],
        )
    )
    fatal = report.is_fatal or bool(parsed.errors)
    print(
        f"validate: {len(report.missing)} missing, {len(report.unknown_frames)} unknown, "
        f"{len(report.duplicates)} duplicates, {len(parsed.errors)} parse errors, "
        f"completeness {report.overall_completeness:.3f}",
        file=sys.stderr,
    )
    return 1 if fatal else 0


def _cmd_score(args) -> int:
    manifest = load_manifest(_read_input(args.manifest), strict=args.strict)
    parsed = parse_log(_read_input(args.log), strict=True)
    report = validate_against_manifest(parsed.records, manifest)
    if report.is_fatal:
        for frame_id, reason in report.unknown_frames:
            print(f"fatal: unknown frame {frame_id!r}: {reason}", file=sys.stderr)
        for frame_id, model_id in report.duplicates:
            print(f"fatal: duplicate frame {frame_id!r} for model {model_id!r}", file=sys.stderr)
        return 1
    build = build_trial_series(parsed.records, manifest)
    if build.missing_reference:
        print(
            f"score: excluded {len(build.missing_reference)} trial(s) lacking a reference record",
            file=sys.stderr,
        )
    kind = MetricKind(args.metric, args.k, args.mode)
    by_model: dict[str, list] = {}
    for s in build.series:
        by_model.setdefault(s.model_id, []).append(s)
    model_ids = sorted(by_model)
    curves = _parallel_map(
        lambda model_id: bootstrap_std(by_model[model_id], kind, args.resamples, args.seed),
        model_ids,
    )
    for curve in curves:
        if curve.diagnostic:
            print(f"score: {curve.model_id}: {curve.diagnostic}", file=sys.stderr)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    emit_curve_csv(curves, args.out)
    _write_run_json(RunConfig("score", _options(args), [args.manifest, args.log], [args.out]))
    return 0


def _cmd_patchdrop(args) -> int:
    in_root = Path(args.images)
    if not in_root.is_dir():
        raise UsageError(f"input directory not found: {args.images}")
    out_root = Path(args.out)
    levels = (
        [float(v) for v in args.levels.split(",")] if args.levels else list(DEFAULT_LEVELS)
    )
    percents = [round(level * 100) for level in levels]
    if len(set(percents)) != len(percents):
        raise UsageError("levels collide after rounding to whole percents")
    fill = int(args.fill)
    files = sorted(p.relative_to(in_root) for p in in_root.rglob("*.png"))
    if not files:
        raise UsageError(f"no .png files under {args.images}")

    def transform(task):
        rel, level, index = task
        image = read_png(in_root / rel)
        seed = derive_seed(args.seed, str(rel).replace(os.sep, "/"), "patch-drop-level", index)
        spec = PatchDropSpec(
            patch_size=args.patch_size, loss_fraction=level, seed=seed, fill_value=fill
        )
        out = drop_patches(image, spec)
        percent = round(level * 100)
        dest = out_root / rel.parent / f"{rel.stem}__drop{percent}{rel.suffix}"
        dest.parent.mkdir(parents=True, exist_ok=True)
        write_png(out, dest)
        rows = image.height // spec.patch_size
        cols = image.width // spec.patch_size
        dropped = select_patches(rows * cols, level, seed)
        return {
            "file": str(dest.relative_to(out_root)).replace(os.sep, "/"),
            "source": str(rel).replace(os.sep, "/"),
            "level": level,
            "seed": seed,
            "dropped_patches": dropped,
        }

    tasks = [(rel, level, i) for rel in files for i, level in enumerate(levels)]
    audit = _parallel_map(transform, tasks)
    out_root.mkdir(parents=True, exist_ok=True)
    audit_path = out_root / "patchdrop_audit.json"
    audit_path.write_text(json.dumps(audit, indent=2) + "\n", encoding="utf-8")
    config = RunConfig(
        "patchdrop",
        _options(args),
        [str(in_root / rel) for rel in files],
        [str(audit_path)],
    )
    _write_run_json(config)
    print(
        f"patchdrop: {len(files)} image(s) x {len(levels)} level(s) -> {args.out}",
        file=sys.stderr,
    )
    return 0


def _cmd_report(args) -> int:
    curves = []
    for path in args.curves:
        curves.extend(parse_curve_csv(_read_input(path).decode("utf-8")))
    spec = CurvePlotSpec(
        curves=curves,
        title=args.title,
        x_label=args.x_label,
        y_label=args.y_label,
        error_bars=not args.no_error_bars,
    )
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    emit_curve_svg(spec, args.out)
    _write_run_json(RunConfig("report", _options(args), list(args.curves), [args.out]))
    return 0


def _cmd_compare(args) -> int:
    curves = parse_curve_csv(_read_input(args.curves).decode("utf-8"))
    if args.metric:
        curves = [c for c in curves if c.kind.label().startswith(args.metric)]
    curve_sets = {}
    for c in curves:
        if c.model_id in curve_sets:
            raise UsageError(
                f"multiple curves for model {c.model_id!r}; narrow with --metric"
            )
        curve_sets[c.model_id] = c
    if not curve_sets:
        raise UsageError("no curves selected")
    pairing = []
    for pair in args.pairs or []:
        a, sep, b = pair.partition(":")
        if not sep:
            raise UsageError(f"--pairs expects A:B, got {pair!r}")
        pairing.append((a, b))
    registry = None
    inputs = [args.curves]
    if args.registry:
        registry = load_model_registry(_read_input(args.registry))
        inputs.append(args.registry)
    interval = tuple(args.interval) if args.interval else None
    table = compare_models(curve_sets, interval=interval, pairing=pairing or None, registry=registry)
    _write_text(args.out, comparison_to_csv(table))
    _write_run_json(RunConfig("compare", _options(args), inputs, [args.out]))
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfsim",
        description="Counterfactual robustness sweeps: plan manifests, validate "
        "prediction logs, score conservation metrics, apply patch-drop occlusion, "
        "and emit comparison reports.",
    )
    parser.add_argument("--version", action="version", version=f"cfsim {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("plan", help="build a sweep manifest for a variation axis")
    p.add_argument("--axis", required=True, choices=AXIS_NAMES)
    p.add_argument("--trials", required=True, help="JSON array of trial objects")
    p.add_argument("--out", required=True, help="manifest JSON destination")
    p.add_argument("--grid", help="comma-separated grid override")
    p.add_argument("--reference", help="reference value override (number or 'absent')")
    p.add_argument("--unit", help="axis unit override")
    p.add_argument(
        "--positions",
        type=int,
        default=DEFAULT_OCCLUDER_POSITIONS,
        help="occluder-position grid size (occluder_position axis only)",
    )
    p.add_argument("--constant", action="append", metavar="KEY=VALUE")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("validate", help="check a prediction log against a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--strict", action="store_true", help="abort on first parse error")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("score", help="compute a metric curve with bootstrap stds")
    p.add_argument("--manifest", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--metric", required=True, choices=METRIC_KIND_NAMES)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--mode", choices=CONSERVATION_MODES, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resamples", type=int, default=DEFAULT_RESAMPLES)
    p.add_argument("--out", required=True, help="curve CSV destination")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("patchdrop", help="apply patch-drop occlusion to a PNG tree")
    p.add_argument("--images", required=True, help="input directory of PNGs")
    p.add_argument("--out", required=True, help="output directory (tree mirrored)")
    p.add_argument("--levels", help="comma-separated information-loss fractions")
    p.add_argument("--patch-size", type=int, default=DEFAULT_PATCH_SIZE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fill", type=int, default=0)
    p.set_defaults(func=_cmd_patchdrop)

    p = sub.add_parser("report", help="plot curve CSVs as an SVG with error bars")
    p.add_argument("--curves", required=True, nargs="+", help="curve CSV file(s)")
    p.add_argument("--out", required=True, help="SVG destination")
    p.add_argument("--title", default="")
    p.add_argument("--x-label", default="")
    p.add_argument("--y-label", default="")
    p.add_argument("--no-error-bars", action="store_true")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("compare", help="summarize per-model curves into a table")
    p.add_argument("--curves", required=True, help="curve CSV file")
    p.add_argument("--metric", help="metric label filter, e.g. pccp@5")
    p.add_argument("--interval", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--pairs", action="append", metavar="MODEL_A:MODEL_B")
    p.add_argument("--registry", help="model registry JSON for params/FLOPs columns")
    p.add_argument("--out", required=True, help="comparison CSV destination")
    p.set_defaults(func=_cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"cfsim {args.subcommand}: {exc}", file=sys.stderr)
        return 2
    except CfsimError as exc:
        print(f"cfsim {args.subcommand}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
