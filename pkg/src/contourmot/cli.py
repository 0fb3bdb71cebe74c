"""
Command-line entry point.

    contourmot evaluate      --input frames.jsonl [--metric ce,iou,cpd] [--out report.json]
    contourmot bins          --input frames.jsonl --by distance|yaw
    contourmot compare       --input frames.jsonl          (CE/IoU quadrant table)
    contourmot correlate     --input frames.jsonl          (CE/IoU/CPD correlations)
    contourmot scatter       --input frames.jsonl --x ce --y iou
    contourmot filter-scenes --input frames.jsonl --class car

Settings come from command-line flags, then a JSON file given with
``--config``, then built-in defaults. Log verbosity is read from the
CONTOURMOT_LOG_LEVEL environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import io as _stdio
import json
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from contourmot import io
from contourmot.assignment import Metric
from contourmot.contour import ContourConfig, Perspective
from contourmot.evaluation import ConfigError, EvalConfig, evaluate
from contourmot.metrics import DEFAULT_THRESHOLDS, QUADRANTS, SCHEMA_VERSION, ClassThresholds

log = logging.getLogger("contourmot")

THRESHOLD_KEYS = ("ce", "iou", "cpd", "scatter_window", "correlation_window")
DEFAULTS = {
    "metric": ["ce", "iou", "cpd"],
    "dim": 3,
    "perspective": "ego",
    "format": "json",
    "by": "distance",
    "x": "ce",
    "y": "iou",
    "min_yaw": 10.0,
    "max_dist": 30.0,
    "min_frames": 10,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    # defaults stay None so that config-file values can fill in
    p.add_argument("--input", help="frame-stream file (one JSON frame per line)")
    p.add_argument("--config", help="JSON file with default settings")
    p.add_argument("--class", dest="class_label", help="evaluate a single class label")
    p.add_argument("--metric", action="append", help="ce, iou, cpd (repeatable or comma separated)")
    p.add_argument(
        "--threshold", action="append",
        help="VALUE, KEY=VALUE or CLASS:KEY=VALUE; KEY is one of " + ", ".join(THRESHOLD_KEYS),
    )
    p.add_argument("--dim", type=int, choices=(2, 3))
    p.add_argument("--perspective", choices=("ego", "object"))
    p.add_argument("--out", help="output path (default: stdout)")


def _add_filter(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-yaw", dest="min_yaw", type=float, help="degrees (default 10)")
    p.add_argument("--max-dist", dest="max_dist", type=float, help="meters (default 30)")
    p.add_argument("--min-frames", dest="min_frames", type=int, help="frames (default 10)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contourmot", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="functional TP/FP/FN/ID-switch report per metric")
    _add_common(p)
    p.add_argument("--format", choices=("json", "csv"))

    p = sub.add_parser("bins", help="per-bin FTP/failure/FTPR and metric summaries")
    _add_common(p)
    _add_filter(p)
    p.add_argument("--by", choices=("distance", "yaw"))
    p.add_argument("--select-scenes", action="store_true", help="apply the scene filter first")

    p = sub.add_parser("compare", help="CE vs IoU quadrant counts per class")
    _add_common(p)

    p = sub.add_parser("correlate", help="Pearson correlations of CE, IoU and CPD per class")
    _add_common(p)

    p = sub.add_parser("scatter", help="per-match CSV of two metrics")
    _add_common(p)
    p.add_argument("--x", choices=("ce", "iou", "cpd", "tde", "eod", "yaw_error"))
    p.add_argument("--y", choices=("ce", "iou", "cpd", "tde", "eod", "yaw_error"))

    p = sub.add_parser("filter-scenes", help="list scenes meeting the yaw/proximity/length criteria")
    _add_common(p)
    _add_filter(p)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags over the config file over defaults."""
    settings = dict(DEFAULTS)
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"{args.config}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc.msg})") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"{args.config}: expected a JSON object")
        for key, value in file_cfg.items():
            key = key.replace("-", "_")
            settings["class_label" if key == "class" else key] = value
    for key, value in vars(args).items():
        if value is not None and key not in ("command", "config"):
            settings[key] = value
    return settings


def parse_metrics(values) -> List[Metric]:
    if isinstance(values, str):
        values = [values]
    names = [v.strip().lower() for item in values for v in str(item).split(",") if v.strip()]
    if not names:
        raise ConfigError("metric list is empty")
    try:
        metrics = [Metric(n) for n in names]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return list(dict.fromkeys(metrics))


def parse_thresholds(
    specs, metrics: Sequence[Metric], classes: Sequence[str]
) -> Dict[str, ClassThresholds]:
    table = {k: dataclasses.asdict(v) for k, v in DEFAULT_THRESHOLDS.items()}
    if isinstance(specs, dict):
        # config file form: {"car": {"ce": 2.0}}
        items = [f"{c}:{k}={v}" for c, row in specs.items() for k, v in row.items()]
    else:
        items = list(specs or [])
    for spec in items:
        spec = str(spec)
        label, _, rest = spec.rpartition(":")
        key, eq, value = rest.partition("=")
        if not eq:
            if len(metrics) != 1:
                raise ConfigError(f"threshold {spec!r} is ambiguous with several metrics; use METRIC=VALUE")
            key, value = metrics[0].value, rest
        key = key.strip().lower()
        if key not in THRESHOLD_KEYS:
            raise ConfigError(f"unknown threshold key {key!r}")
        try:
            number = float(value)
        except ValueError:
            raise ConfigError(f"threshold {spec!r} is not a number") from None
        if not number > 0 or (key == "iou" and number > 1):
            raise ConfigError(f"threshold {spec!r} is out of range")
        targets = [label] if label else (list(classes) or list(table))
        for target in targets:
            row = table.setdefault(target, {})
            row[key] = number
    out = {}
    for label, row in table.items():
        missing = [k for k in THRESHOLD_KEYS if k not in row]
        if missing:
            raise ConfigError(f"class {label!r} lacks thresholds: {', '.join(missing)}")
        out[label] = ClassThresholds(**row)
    return out


def build_config(settings: dict, metrics: Sequence[Metric]) -> EvalConfig:
    try:
        contour = ContourConfig(int(settings["dim"]), Perspective(settings["perspective"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    label = settings.get("class_label")
    classes = [label] if label else None
    thresholds = parse_thresholds(settings.get("threshold") or settings.get("thresholds"), metrics, classes or [])
    if label and label not in thresholds:
        raise ConfigError(f"no thresholds configured for class {label!r}")
    return EvalConfig(contour=contour, classes=classes, thresholds=thresholds)


def load_scenes(settings: dict):
    path = settings.get("input")
    if not path:
        raise ConfigError("--input is required")
    return io.read_frames(path)


def emit(settings: dict, text: str) -> None:
    out = settings.get("out")
    if out:
        try:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"{out}: {exc.strerror or exc}") from None
    else:
        sys.stdout.write(text)


def _csv(header, rows) -> str:
    buf = _stdio.StringIO()
    io.write_table(buf, header, rows)
    return buf.getvalue()


def _fmt(v) -> str:
    return "" if v is None else (repr(v) if isinstance(v, float) else str(v))


# ------------------------------------------------------------ commands

def cmd_evaluate(settings: dict) -> None:
    metrics = parse_metrics(settings["metric"])
    config = build_config(settings, metrics)
    result = evaluate(load_scenes(settings), metrics, config)
    reports = [result.reports[m] for m in metrics]
    if settings["format"] == "csv":
        emit(settings, _csv(io.DISTANCE_COLUMNS, [row for r in reports for row in io.distance_rows(r)]))
    else:
        emit(settings, io.reports_json(reports))


def cmd_bins(settings: dict) -> None:
    metrics = parse_metrics(settings["metric"])
    config = build_config(settings, metrics)
    scenes = load_scenes(settings)
    if settings.get("select_scenes"):
        scenes = io.filter_scenes(
            scenes, _scene_filter(settings), settings.get("class_label") or "car", config
        )
    if settings["by"] == "yaw":
        config = dataclasses.replace(config, yaw_max_distance=float(settings["max_dist"]))
    result = evaluate(scenes, metrics, config)
    reports = [result.reports[m] for m in metrics]
    if settings["by"] == "yaw":
        emit(settings, _csv(io.YAW_COLUMNS, [row for r in reports for row in io.yaw_rows(r)]))
    else:
        emit(settings, _csv(io.DISTANCE_COLUMNS, [row for r in reports for row in io.distance_rows(r)]))


def cmd_compare(settings: dict) -> None:
    metrics = parse_metrics(settings["metric"])
    config = build_config(settings, metrics)
    report = next(iter(evaluate(load_scenes(settings), [Metric.CE], config).reports.values()))
    header = ["schema_version", "class", "total", *QUADRANTS, *(f"{q}_pct" for q in QUADRANTS)]
    rows = []
    for label, q in sorted(report.quadrants.items()):
        counts = [getattr(q, name) for name in QUADRANTS]
        pct = [100.0 * c / q.total if q.total else None for c in counts]
        rows.append([_fmt(v) for v in (SCHEMA_VERSION, label, q.total, *counts, *pct)])
    emit(settings, _csv(header, rows))


def cmd_correlate(settings: dict) -> None:
    metrics = parse_metrics(settings["metric"])
    config = build_config(settings, metrics)
    report = next(iter(evaluate(load_scenes(settings), [Metric.CE], config).reports.values()))
    header = ["schema_version", "class", "count", "ce_iou", "ce_cpd", "iou_cpd"]
    rows = [
        [_fmt(v) for v in (SCHEMA_VERSION, label, row["count"], row["ce_iou"], row["ce_cpd"], row["iou_cpd"])]
        for label, row in sorted(report.correlations.items())
    ]
    emit(settings, _csv(header, rows))


def cmd_scatter(settings: dict) -> None:
    metrics = parse_metrics(settings["metric"])
    config = build_config(settings, metrics)
    result = evaluate(load_scenes(settings), [Metric.CE], config)
    emit(settings, _csv(io.SCATTER_COLUMNS, io.scatter_rows(result.reference, settings["x"], settings["y"])))


def _scene_filter(settings: dict) -> io.SceneFilter:
    try:
        return io.SceneFilter(
            float(settings["min_yaw"]), float(settings["max_dist"]), int(settings["min_frames"])
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_filter_scenes(settings: dict) -> None:
    metrics = parse_metrics(settings["metric"])
    config = build_config(settings, metrics)
    label = settings.get("class_label") or "car"
    selected = io.filter_scenes(load_scenes(settings), _scene_filter(settings), label, config)
    emit(settings, "".join(f"{s.scene_id}\n" for s in selected))


COMMANDS = {
    "evaluate": cmd_evaluate,
    "bins": cmd_bins,
    "compare": cmd_compare,
    "correlate": cmd_correlate,
    "scatter": cmd_scatter,
    "filter-scenes": cmd_filter_scenes,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = getattr(logging, os.environ.get("CONTOURMOT_LOG_LEVEL", "WARNING").upper(), None)
    logging.basicConfig(
        level=level if isinstance(level, int) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        settings = resolve(args)
        log.debug("settings: %s", settings)
        COMMANDS[args.command](settings)
    except (ValueError, OSError) as exc:
        print(f"contourmot {args.command}: error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
