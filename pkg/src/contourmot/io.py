"""
Frame-stream reading/writing, scene selection and report export.

Frame stream: UTF-8 text, one JSON object per line (blank lines ignored)::

    {"scene_id": "s1", "frame_index": 0, "timestamp": 0.0,
     "ego": {"x": 0.0, "y": 0.0, "z": 0.0, "yaw": 0.0},
     "gt":   [{"id": "g1", "class": "car", "center": [x, y, z],
               "size": [length, width, height], "yaw": 0.0}],
     "pred": [{"id": "p1", "class": "car", "center": [x, y, z],
               "size": [length, width, height], "yaw": 0.0, "score": 0.9}]}

Boxes live in a global frame; ``center``/``size`` have 2 or 3 entries and
every box in a file must agree. Angles are radians, lengths meters. The ego
``z`` is optional (0 when absent) and ignored for 2D files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, TextIO, Union

from contourmot.geometry import EgoPose, OrientedBox
from contourmot.metrics import SCHEMA_VERSION, EvalReport, MetricRecord


class ParseError(ValueError):
    """Malformed frame-stream input; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class TrackedObject:
    track_id: str
    class_label: str
    box: OrientedBox
    score: Optional[float] = None


@dataclass
class Frame:
    scene_id: str
    frame_index: int
    timestamp: float
    ego: EgoPose
    gt: List[TrackedObject] = field(default_factory=list)
    pred: List[TrackedObject] = field(default_factory=list)

    @property
    def dim(self) -> Optional[int]:
        for obj in self.gt + self.pred:
            return obj.box.dim
        return None


@dataclass
class Scene:
    scene_id: str
    frames: List[Frame] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frames)


# ------------------------------------------------------------ parsing

def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{what} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ValueError(f"{what} must be finite")
    return float(value)


def _vector(value, what: str) -> List[float]:
    if not isinstance(value, list) or len(value) not in (2, 3):
        raise ValueError(f"{what} must be a list of 2 or 3 numbers, got {value!r}")
    return [_number(v, what) for v in value]


def _parse_object(raw, side: str, k: int, predicted: bool) -> TrackedObject:
    what = f"{side}[{k}]"
    if not isinstance(raw, dict):
        raise ValueError(f"{what} must be an object")
    for key in ("id", "class", "center", "size", "yaw"):
        if key not in raw:
            raise ValueError(f"{what} is missing '{key}'")
    track_id = raw["id"]
    if isinstance(track_id, bool) or not isinstance(track_id, (str, int)):
        raise ValueError(f"{what}.id must be a string or integer")
    if not isinstance(raw["class"], str) or not raw["class"]:
        raise ValueError(f"{what}.class must be a non-empty string")
    center = _vector(raw["center"], f"{what}.center")
    size = _vector(raw["size"], f"{what}.size")
    if len(center) != len(size):
        raise ValueError(f"{what}: center and size differ in length")
    box = OrientedBox(center, size, _number(raw["yaw"], f"{what}.yaw"))
    score = None
    if predicted and raw.get("score") is not None:
        score = _number(raw["score"], f"{what}.score")
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"{what}.score must lie in [0, 1]")
    return TrackedObject(str(track_id), raw["class"], box, score)


def parse_frame(text: str) -> Frame:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON ({exc.msg})") from None
    if not isinstance(raw, dict):
        raise ValueError("a frame must be a JSON object")
    for key in ("scene_id", "frame_index", "timestamp", "ego", "gt", "pred"):
        if key not in raw:
            raise ValueError(f"missing field '{key}'")
    scene_id = raw["scene_id"]
    if not isinstance(scene_id, str) or not scene_id:
        raise ValueError("scene_id must be a non-empty string")
    index = raw["frame_index"]
    if isinstance(index, bool) or not isinstance(index, int) or index < 0:
        raise ValueError("frame_index must be an integer >= 0")
    ego_raw = raw["ego"]
    if not isinstance(ego_raw, dict) or "x" not in ego_raw or "y" not in ego_raw:
        raise ValueError("ego must be an object with at least x and y")
    ego_xyz = [_number(ego_raw["x"], "ego.x"), _number(ego_raw["y"], "ego.y"),
               _number(ego_raw.get("z", 0.0), "ego.z")]
    ego_yaw = _number(ego_raw.get("yaw", 0.0), "ego.yaw")
    if not isinstance(raw["gt"], list) or not isinstance(raw["pred"], list):
        raise ValueError("gt and pred must be lists")
    gt = [_parse_object(o, "gt", k, False) for k, o in enumerate(raw["gt"])]
    pred = [_parse_object(o, "pred", k, True) for k, o in enumerate(raw["pred"])]
    for side, objs in (("gt", gt), ("pred", pred)):
        seen = set()
        for obj in objs:
            if obj.track_id in seen:
                raise ValueError(f"duplicate {side} track id {obj.track_id!r}")
            seen.add(obj.track_id)
    dims = {o.box.dim for o in gt + pred}
    if len(dims) > 1:
        raise ValueError("boxes of mixed dimension in one frame")
    dim = dims.pop() if dims else 3
    ego = EgoPose(ego_xyz[:dim], ego_yaw)
    return Frame(scene_id, index, _number(raw["timestamp"], "timestamp"), ego, gt, pred)


def parse_frames(lines: Iterable[str]) -> List[Scene]:
    """Parse a frame stream into scenes, in order of first appearance."""
    scenes: dict = {}
    file_dim = None
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            frame = parse_frame(line)
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from None
        if frame.dim is not None:
            if file_dim is None:
                file_dim = frame.dim
            elif frame.dim != file_dim:
                raise ParseError(line_no, f"{frame.dim}D boxes in a {file_dim}D file")
        scene = scenes.setdefault(frame.scene_id, Scene(frame.scene_id))
        if scene.frames and frame.frame_index <= scene.frames[-1].frame_index:
            raise ParseError(
                line_no,
                f"frame_index {frame.frame_index} does not increase in scene {frame.scene_id!r}",
            )
        scene.frames.append(frame)
    if file_dim == 2:
        # frames without boxes defaulted to a 3D ego; align them with the file
        for scene in scenes.values():
            for frame in scene.frames:
                frame.ego = frame.ego.bev()
    return list(scenes.values())


def read_frames(path: Union[str, Path]) -> List[Scene]:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as fh:
            return parse_frames(fh)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc


def _object_dict(obj: TrackedObject, predicted: bool) -> dict:
    out = {
        "id": obj.track_id,
        "class": obj.class_label,
        "center": obj.box.center.tolist(),
        "size": obj.box.extents.tolist(),
        "yaw": obj.box.yaw,
    }
    if predicted and obj.score is not None:
        out["score"] = obj.score
    return out


def format_frame(frame: Frame) -> str:
    pos = frame.ego.position
    ego = {"x": float(pos[0]), "y": float(pos[1])}
    if frame.ego.dim == 3:
        ego["z"] = float(pos[2])
    ego["yaw"] = frame.ego.yaw
    doc = {
        "scene_id": frame.scene_id,
        "frame_index": frame.frame_index,
        "timestamp": frame.timestamp,
        "ego": ego,
        "gt": [_object_dict(o, False) for o in frame.gt],
        "pred": [_object_dict(o, True) for o in frame.pred],
    }
    return json.dumps(doc, separators=(",", ":"))


def write_frames(scenes: Sequence[Scene], fh: TextIO) -> None:
    for scene in scenes:
        for frame in scene.frames:
            fh.write(format_frame(frame) + "\n")


# ------------------------------------------------------------ scene selection

@dataclass(frozen=True)
class SceneFilter:
    """Scene selection thresholds (degrees, meters, frames)."""

    min_yaw_error: float = 10.0
    max_proximity: float = 30.0
    min_frames: int = 10

    def __post_init__(self):
        if not (self.min_yaw_error > 0 and self.max_proximity > 0 and self.min_frames > 0):
            raise ValueError("scene filter thresholds must be positive")


def filter_scenes(
    scenes: Sequence[Scene],
    scene_filter: SceneFilter = SceneFilter(),
    class_label: str = "car",
    config=None,
) -> List[Scene]:
    """Keep scenes that have enough frames, a ground truth of `class_label`
    closer than `max_proximity`, and a contour-gated match of that class with
    yaw error above `min_yaw_error`.

    `config` is an `evaluation.EvalConfig`; its class thresholds and contour
    settings define the matching used for the yaw criterion.
    """
    from contourmot.evaluation import EvalConfig, scene_matches
    from contourmot.metrics import distance_to_ego

    config = config or EvalConfig()
    selected = []
    for scene in scenes:
        if len(scene.frames) < scene_filter.min_frames:
            continue
        near = any(
            obj.class_label == class_label
            and distance_to_ego(config.contour.project(obj.box), config.contour.project_ego(frame.ego))
            < scene_filter.max_proximity
            for frame in scene.frames
            for obj in frame.gt
        )
        if not near:
            continue
        records = scene_matches(scene, class_label, config)
        if any(r.yaw_error > scene_filter.min_yaw_error for r in records):
            selected.append(scene)
    return selected


# ------------------------------------------------------------ export

def report_json(report: EvalReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def reports_json(reports: Sequence[EvalReport]) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "reports": [r.to_dict() for r in reports]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_reports(path: Union[str, Path]) -> List[EvalReport]:
    """Read a document written by `export_report` (one report or several)."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if "reports" in doc:
        return [EvalReport.from_dict(d) for d in doc["reports"]]
    return [EvalReport.from_dict(doc)]


def load_report(path: Union[str, Path]) -> EvalReport:
    reports = load_reports(path)
    if len(reports) != 1:
        raise ValueError(f"{path}: expected one report, found {len(reports)}")
    return reports[0]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


DISTANCE_COLUMNS = [
    "schema_version", "metric", "bin", "lower", "upper", "gt_count", "ftp", "failures", "ftpr",
    "matches", "tde_mean", "tde_median", "eod_mean", "eod_median", "ce_mean", "ce_median",
    "iou_mean", "iou_median", "cpd_mean", "cpd_median",
]
YAW_COLUMNS = ["schema_version", "metric", "bin", "lower", "upper", "ftp", "failures", "ftpr"]


def distance_rows(report: EvalReport) -> List[List[str]]:
    rows = []
    for b in report.distance_bins:
        row = [SCHEMA_VERSION, report.metric, b.label, b.lower, None if math.isinf(b.upper) else b.upper,
               b.gt_count, b.ftp, b.failures, b.ftpr, b.stats.get("count", 0)]
        for name in ("tde", "eod", "ce", "iou", "cpd"):
            s = b.stats.get(name, {"mean": None, "median": None})
            row += [s["mean"], s["median"]]
        rows.append([_fmt(v) for v in row])
    return rows


def yaw_rows(report: EvalReport) -> List[List[str]]:
    return [
        [_fmt(v) for v in (SCHEMA_VERSION, report.metric, b.label, b.lower, b.upper, b.ftp, b.failures, b.ftpr)]
        for b in report.yaw_bins
    ]


def write_table(fh: TextIO, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def export_report(
    report: Union[EvalReport, Sequence[EvalReport]],
    path: Union[str, Path],
    fmt: str = "structured",
    table: str = "distance",
) -> Path:
    """Write one report (or several) as JSON ("structured") or CSV ("tabular").

    Tabular output has one row per bin; `table` picks the distance or yaw bins.
    """
    reports = [report] if isinstance(report, EvalReport) else list(report)
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            if fmt == "structured":
                fh.write(report_json(reports[0]) if isinstance(report, EvalReport) else reports_json(reports))
            elif fmt == "tabular":
                if table == "distance":
                    write_table(fh, DISTANCE_COLUMNS, [row for r in reports for row in distance_rows(r)])
                elif table == "yaw":
                    write_table(fh, YAW_COLUMNS, [row for r in reports for row in yaw_rows(r)])
                else:
                    raise ValueError(f"unknown table {table!r}")
            else:
                raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    return path


SCATTER_COLUMNS = [
    "schema_version", "scene_id", "frame_index", "gt_id", "pred_id", "class", "gt_to_ego",
    "metric_x", "metric_y",
]


def scatter_rows(records: Iterable[MetricRecord], x: str = "ce", y: str = "iou") -> List[List[str]]:
    rows = []
    for r in records:
        rows.append([_fmt(v) for v in (
            SCHEMA_VERSION, r.scene_id, r.frame_index, r.gt_id, r.pred_id, r.class_label,
            r.gt_to_ego, getattr(r, x), getattr(r, y),
        )])
    return rows


RECORD_COLUMNS = [
    "schema_version", "scene_id", "frame_index", "gt_id", "pred_id", "class", "gt_to_ego",
    "ce", "iou", "cpd", "tde", "eod", "yaw_error",
]


def record_rows(records: Iterable[MetricRecord]) -> List[List[str]]:
    return [
        [_fmt(v) for v in (
            SCHEMA_VERSION, r.scene_id, r.frame_index, r.gt_id, r.pred_id, r.class_label,
            r.gt_to_ego, r.ce, r.iou, r.cpd, r.tde, r.eod, r.yaw_error,
        )]
        for r in records
    ]
