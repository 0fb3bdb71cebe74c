"""
Functional error accounting and ego-centric diagnostics.

Counts follow the functional taxonomy: a gated match is a functional true
positive (FTP), a ground truth without an accepted partner is a functional
false negative (FFN), a prediction without one is a functional false positive
(FFP), and a ground-truth track whose accepted prediction ID changes is a
functional ID switch (FID).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from contourmot.contour import ContourConfig, contour_error
from contourmot.geometry import DimensionError, EgoPose, OrientedBox, angle_difference, cpd, iou

SCHEMA_VERSION = 1

DISTANCE_EDGES = (0.0, 10.0, 20.0, 30.0, math.inf)
YAW_EDGES = (0.0, 10.0, 30.0, 180.0)
SUMMARY_FIELDS = ("tde", "eod", "ce", "iou", "cpd")
CORRELATION_PAIRS = (("ce", "iou"), ("ce", "cpd"), ("iou", "cpd"))


@dataclass(frozen=True)
class ClassThresholds:
    """Per-class gates and analysis windows.

    ce, cpd, scatter_window and correlation_window are meters; iou is the
    minimum overlap for an IoU match.
    """

    ce: float
    iou: float
    cpd: float
    scatter_window: float
    correlation_window: float

    def gate(self, metric: str) -> float:
        return getattr(self, str(getattr(metric, "value", metric)))


DEFAULT_THRESHOLDS: Dict[str, ClassThresholds] = {
    "pedestrian": ClassThresholds(ce=1.0, iou=0.5, cpd=2.0, scatter_window=5.0, correlation_window=0.61),
    "car": ClassThresholds(ce=2.5, iou=0.7, cpd=2.0, scatter_window=10.0, correlation_window=2.01),
    "truck": ClassThresholds(ce=3.5, iou=0.7, cpd=2.0, scatter_window=15.0, correlation_window=2.16),
}


# ------------------------------------------------------------ pair metrics

def _project(gt: OrientedBox, pred: OrientedBox, ego: EgoPose) -> Tuple[OrientedBox, OrientedBox, EgoPose]:
    dim = min(gt.dim, pred.dim, ego.dim)
    if gt.dim != pred.dim:
        raise DimensionError(f"dimension mismatch: {gt.dim} vs {pred.dim}")
    if dim == 2:
        return gt.bev(), pred.bev(), ego.bev()
    return gt, pred, ego


def distance_to_ego(box: OrientedBox, ego: EgoPose) -> float:
    if box.dim != ego.dim:
        box, ego = box.bev(), ego.bev()
    return float(np.linalg.norm(box.center - ego.position))


def yaw_error(gt: OrientedBox, pred: OrientedBox) -> float:
    """Absolute heading difference in degrees, wrapped to [0, 180]."""
    return math.degrees(angle_difference(gt.yaw, pred.yaw))


def tde(gt: OrientedBox, pred: OrientedBox, ego: EgoPose) -> float:
    """Translational distance error: difference of the two ranges to the ego, in meters."""
    gt, pred, ego = _project(gt, pred, ego)
    return abs(distance_to_ego(gt, ego) - distance_to_ego(pred, ego))


def eod(gt: OrientedBox, pred: OrientedBox, ego: EgoPose) -> float:
    """Ego-centric orientation divergence in degrees per meter."""
    gt, pred, ego = _project(gt, pred, ego)
    d = distance_to_ego(gt, ego)
    if d <= 0.0:
        raise ValueError("ground-truth center coincides with the ego position")
    return yaw_error(gt, pred) / d


@dataclass
class MetricRecord:
    """Every metric for one matched GT/prediction pair."""

    scene_id: str
    frame_index: int
    gt_id: str
    pred_id: str
    class_label: str
    ce: float
    iou: float
    cpd: float
    tde: float
    eod: Optional[float]  # None when the GT sits exactly on the ego position
    gt_to_ego: float
    yaw_error: float

    def to_dict(self) -> dict:
        return asdict(self)


def make_record(
    scene_id: str,
    frame_index: int,
    gt_obj,
    pred_obj,
    ego: EgoPose,
    config: ContourConfig,
    ce: Optional[float] = None,
) -> MetricRecord:
    gt, pred = config.project(gt_obj.box), config.project(pred_obj.box)
    ego_p = config.project_ego(ego)
    d_gt = distance_to_ego(gt, ego_p)
    if ce is None:
        ce = contour_error(gt, pred, ego_p, config)
    return MetricRecord(
        scene_id=scene_id,
        frame_index=frame_index,
        gt_id=gt_obj.track_id,
        pred_id=pred_obj.track_id,
        class_label=gt_obj.class_label,
        ce=float(ce),
        iou=iou(gt, pred),
        cpd=cpd(gt, pred),
        tde=tde(gt, pred, ego_p),
        eod=eod(gt, pred, ego_p) if d_gt > 0 else None,
        gt_to_ego=d_gt,
        yaw_error=yaw_error(gt, pred),
    )


# ------------------------------------------------------------ accumulation

@dataclass
class Counts:
    ftp: int = 0
    ffp: int = 0
    ffn: int = 0
    fid: int = 0

    def __iadd__(self, other: "Counts") -> "Counts":
        self.ftp += other.ftp
        self.ffp += other.ffp
        self.ffn += other.ffn
        self.fid += other.fid
        return self

    @property
    def failures(self) -> int:
        return self.ffp + self.ffn

    @property
    def ftpr(self) -> Optional[float]:
        return ftpr(self.ftp, self.failures)


def ftpr(ftp: int, failures: int) -> Optional[float]:
    """Functional true-positive rate in percent, None when there is nothing to rate."""
    total = ftp + failures
    if total <= 0:
        return None
    return 100.0 * ftp / total


def accumulate_frame(
    match,
    frame,
    prev_assignments: Mapping[str, str],
    config: ContourConfig = ContourConfig(),
) -> Tuple[Counts, Dict[str, str], List[MetricRecord]]:
    """Count functional errors for one gated frame.

    `prev_assignments` maps a GT track ID to the prediction ID it was last
    matched to; a change counts as an ID switch, frames without a match for
    that GT do not reset it. Returns the frame counts, the updated map and a
    record per accepted pair.
    """
    counts = Counts(
        ftp=len(match.matched),
        ffn=len(match.unmatched_gt),
        ffp=len(match.unmatched_pred),
    )
    updated = dict(prev_assignments)
    records = []
    for i, j, cost in match.matched:
        gt_obj, pred_obj = frame.gt[i], frame.pred[j]
        last = updated.get(gt_obj.track_id)
        if last is not None and last != pred_obj.track_id:
            counts.fid += 1
        updated[gt_obj.track_id] = pred_obj.track_id
        records.append(make_record(frame.scene_id, frame.frame_index, gt_obj, pred_obj, frame.ego, config))
    return counts, updated, records


# ------------------------------------------------------------ quadrants

QUADRANTS = ("reliable", "contour_based", "poor", "iou_based")


@dataclass
class QuadrantCounts:
    reliable: int = 0        # CE <= tau and IoU > tau_iou
    contour_based: int = 0   # CE <= tau and IoU <= tau_iou
    poor: int = 0            # CE > tau and IoU <= tau_iou
    iou_based: int = 0       # CE > tau and IoU > tau_iou

    @property
    def total(self) -> int:
        return self.reliable + self.contour_based + self.poor + self.iou_based

    def to_dict(self) -> dict:
        out = asdict(self)
        out["total"] = self.total
        return out


def quadrant_of(ce: float, iou_value: float, ce_tau: float, iou_tau: float) -> str:
    ce_ok = ce <= ce_tau
    iou_ok = iou_value > iou_tau
    if ce_ok:
        return "reliable" if iou_ok else "contour_based"
    return "iou_based" if iou_ok else "poor"


def quadrant_classify(
    records: Iterable[MetricRecord],
    thresholds: Mapping[str, ClassThresholds] = DEFAULT_THRESHOLDS,
) -> QuadrantCounts:
    counts = QuadrantCounts()
    for rec in records:
        th = thresholds[rec.class_label]
        name = quadrant_of(rec.ce, rec.iou, th.ce, th.iou)
        setattr(counts, name, getattr(counts, name) + 1)
    return counts


# ------------------------------------------------------------ binning

def _bin_index(value: float, edges: Sequence[float], closed_last: bool = False) -> Optional[int]:
    for k in range(len(edges) - 1):
        lo, hi = edges[k], edges[k + 1]
        last = k == len(edges) - 2
        if lo <= value < hi or (closed_last and last and value == hi):
            return k
    return None


def bin_label(lo: float, hi: float, unit: str) -> str:
    if math.isinf(hi):
        return f">{lo:g}{unit}"
    return f"{lo:g}-{hi:g}{unit}"


@dataclass
class DistanceBin:
    """One proximity bin.

    `gt_count`, `ftp` and `failures` count ground-truth objects whose range to
    the ego falls in the bin; `stats` summarizes the accepted pairs.
    """

    lower: float
    upper: float
    gt_count: int = 0
    ftp: int = 0
    stats: Dict[str, Dict[str, Optional[float]]] = field(default_factory=dict)

    @property
    def label(self) -> str:
        return bin_label(self.lower, self.upper, "m")

    @property
    def failures(self) -> int:
        return self.gt_count - self.ftp

    @property
    def ftpr(self) -> Optional[float]:
        return ftpr(self.ftp, self.failures)


@dataclass
class YawBin:
    lower: float
    upper: float
    ftp: int = 0
    failures: int = 0

    @property
    def label(self) -> str:
        return bin_label(self.lower, self.upper, "deg")

    @property
    def ftpr(self) -> Optional[float]:
        return ftpr(self.ftp, self.failures)


def summarize(values: Sequence[float]) -> Dict[str, Optional[float]]:
    if len(values) == 0:
        return {"mean": None, "median": None}
    arr = np.asarray(values, dtype=float)
    return {"mean": float(arr.mean()), "median": float(np.median(arr))}


def bin_by_distance(
    records: Iterable[MetricRecord],
    edges: Sequence[float] = DISTANCE_EDGES,
) -> List[DistanceBin]:
    """Mean/median of TDE, EOD, CE, IoU and CPD per half-open range bin [lo, hi).

    `gt_count` and `ftp` are set to the number of records in the bin; use
    `count_outcomes_by_distance` to add unmatched ground truth.
    """
    grouped: List[List[MetricRecord]] = [[] for _ in range(len(edges) - 1)]
    for rec in records:
        k = _bin_index(rec.gt_to_ego, edges)
        if k is not None:
            grouped[k].append(rec)
    bins = []
    for k, recs in enumerate(grouped):
        stats = {
            name: summarize([getattr(r, name) for r in recs if getattr(r, name) is not None])
            for name in SUMMARY_FIELDS
        }
        stats["count"] = len(recs)
        bins.append(DistanceBin(edges[k], edges[k + 1], gt_count=len(recs), ftp=len(recs), stats=stats))
    return bins


@dataclass
class GTOutcome:
    """Fate of one ground-truth object in one frame under one matching criterion.

    `yaw_error` comes from the reference pairing shared by all criteria, so
    that each criterion is rated on the same population; it is None when the
    object had no reference partner.
    """

    scene_id: str
    frame_index: int
    gt_id: str
    class_label: str
    gt_to_ego: float
    matched: bool
    yaw_error: Optional[float] = None


def count_outcomes_by_distance(
    outcomes: Iterable[GTOutcome], bins: List[DistanceBin]
) -> List[DistanceBin]:
    """Fill gt_count/ftp of existing distance bins from per-object outcomes."""
    edges = [b.lower for b in bins] + [bins[-1].upper] if bins else []
    for b in bins:
        b.gt_count = 0
        b.ftp = 0
    for out in outcomes:
        k = _bin_index(out.gt_to_ego, edges)
        if k is None:
            continue
        bins[k].gt_count += 1
        bins[k].ftp += int(out.matched)
    return bins


def bin_by_yaw(
    outcomes: Iterable[GTOutcome],
    edges: Sequence[float] = YAW_EDGES,
    max_distance: Optional[float] = None,
) -> Tuple[List[YawBin], int]:
    """FTP/failure counts per yaw-error bin [lo, hi), the last bin closed.

    Objects beyond `max_distance` are skipped. Returns the bins and the number
    of in-range objects that had no reference yaw error.
    """
    bins = [YawBin(edges[k], edges[k + 1]) for k in range(len(edges) - 1)]
    unbinned = 0
    for out in outcomes:
        if max_distance is not None and not out.gt_to_ego < max_distance:
            continue
        if out.yaw_error is None:
            unbinned += 1
            continue
        k = _bin_index(out.yaw_error, edges, closed_last=True)
        if k is None:
            unbinned += 1
            continue
        if out.matched:
            bins[k].ftp += 1
        else:
            bins[k].failures += 1
    return bins, unbinned


# ------------------------------------------------------------ correlation

def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError("correlation needs two equal-length 1D samples")
    if xa.size < 2:
        raise ValueError("correlation needs at least two samples")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    # spreads at rounding level count as constant
    floor_x = xa.size * (1e-12 * max(1.0, float(np.abs(xa).max()))) ** 2
    floor_y = ya.size * (1e-12 * max(1.0, float(np.abs(ya).max()))) ** 2
    if sxx <= floor_x or syy <= floor_y:
        raise ValueError("correlation is undefined for a zero-variance sample")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def correlate(records: Sequence[MetricRecord], fields: Tuple[str, str]) -> float:
    """Sample Pearson coefficient between two record fields."""
    a, b = fields
    return pearson([getattr(r, a) for r in records], [getattr(r, b) for r in records])


def correlation_table(
    records: Sequence[MetricRecord],
    thresholds: Mapping[str, ClassThresholds] = DEFAULT_THRESHOLDS,
) -> Dict[str, Dict[str, Optional[float]]]:
    """Per class, CE/IoU/CPD correlations over pairs inside the class's CE window."""
    table = {}
    for label in sorted({r.class_label for r in records}):
        window = thresholds[label].correlation_window
        selected = [r for r in records if r.class_label == label and r.ce <= window]
        row = {"count": len(selected)}
        for pair in CORRELATION_PAIRS:
            try:
                row[f"{pair[0]}_{pair[1]}"] = correlate(selected, pair)
            except ValueError:
                row[f"{pair[0]}_{pair[1]}"] = None
        table[label] = row
    return table


# ------------------------------------------------------------ report

@dataclass
class SceneCounts:
    scene_id: str
    frames: int = 0
    gt: int = 0
    pred: int = 0
    counts: Counts = field(default_factory=Counts)


@dataclass
class EvalReport:
    """Accumulated results for one matching criterion over a set of scenes."""

    metric: str
    dimension: int = 3
    perspective: str = "ego"
    classes: List[str] = field(default_factory=list)
    thresholds: Dict[str, float] = field(default_factory=dict)
    frames: int = 0
    gt: int = 0
    pred: int = 0
    counts: Counts = field(default_factory=Counts)
    scenes: List[SceneCounts] = field(default_factory=list)
    distance_bins: List[DistanceBin] = field(default_factory=list)
    yaw_bins: List[YawBin] = field(default_factory=list)
    yaw_unbinned: int = 0
    yaw_max_distance: Optional[float] = None
    quadrants: Dict[str, QuadrantCounts] = field(default_factory=dict)
    correlations: Dict[str, Dict[str, Optional[float]]] = field(default_factory=dict)

    @property
    def ftp(self) -> int:
        return self.counts.ftp

    @property
    def ffp(self) -> int:
        return self.counts.ffp

    @property
    def ffn(self) -> int:
        return self.counts.ffn

    @property
    def fid(self) -> int:
        return self.counts.fid

    @property
    def ftpr(self) -> Optional[float]:
        return self.counts.ftpr

    def to_dict(self) -> dict:
        def counts_dict(c: Counts) -> dict:
            return {
                "ftp": c.ftp, "ffp": c.ffp, "ffn": c.ffn, "fid": c.fid,
                "failures": c.failures, "ftpr": c.ftpr,
            }

        return {
            "schema_version": SCHEMA_VERSION,
            "metric": self.metric,
            "dimension": self.dimension,
            "perspective": self.perspective,
            "classes": list(self.classes),
            "thresholds": dict(sorted(self.thresholds.items())),
            "totals": {"frames": self.frames, "gt": self.gt, "pred": self.pred, **counts_dict(self.counts)},
            "scenes": [
                {"scene_id": s.scene_id, "frames": s.frames, "gt": s.gt, "pred": s.pred, **counts_dict(s.counts)}
                for s in self.scenes
            ],
            "distance_bins": [
                {
                    "label": b.label,
                    "lower": b.lower,
                    "upper": None if math.isinf(b.upper) else b.upper,
                    "gt_count": b.gt_count,
                    "ftp": b.ftp,
                    "failures": b.failures,
                    "ftpr": b.ftpr,
                    "stats": b.stats,
                }
                for b in self.distance_bins
            ],
            "yaw_bins": [
                {
                    "label": b.label, "lower": b.lower, "upper": b.upper,
                    "ftp": b.ftp, "failures": b.failures, "ftpr": b.ftpr,
                }
                for b in self.yaw_bins
            ],
            "yaw_unbinned": self.yaw_unbinned,
            "yaw_max_distance": self.yaw_max_distance,
            "quadrants": {k: v.to_dict() for k, v in sorted(self.quadrants.items())},
            "correlations": {k: dict(v) for k, v in sorted(self.correlations.items())},
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "EvalReport":
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema_version {version!r}")

        def counts_of(d: Mapping) -> Counts:
            return Counts(ftp=d["ftp"], ffp=d["ffp"], ffn=d["ffn"], fid=d["fid"])

        totals = doc["totals"]
        return cls(
            metric=doc["metric"],
            dimension=doc["dimension"],
            perspective=doc["perspective"],
            classes=list(doc["classes"]),
            thresholds=dict(doc["thresholds"]),
            frames=totals["frames"],
            gt=totals["gt"],
            pred=totals["pred"],
            counts=counts_of(totals),
            scenes=[
                SceneCounts(s["scene_id"], s["frames"], s["gt"], s["pred"], counts_of(s))
                for s in doc["scenes"]
            ],
            distance_bins=[
                DistanceBin(
                    b["lower"],
                    math.inf if b["upper"] is None else b["upper"],
                    gt_count=b["gt_count"],
                    ftp=b["ftp"],
                    stats={k: (dict(v) if isinstance(v, Mapping) else v) for k, v in b["stats"].items()},
                )
                for b in doc["distance_bins"]
            ],
            yaw_bins=[YawBin(b["lower"], b["upper"], b["ftp"], b["failures"]) for b in doc["yaw_bins"]],
            yaw_unbinned=doc["yaw_unbinned"],
            yaw_max_distance=doc["yaw_max_distance"],
            quadrants={
                k: QuadrantCounts(**{q: v[q] for q in QUADRANTS}) for k, v in doc["quadrants"].items()
            },
            correlations={k: dict(v) for k, v in doc["correlations"].items()},
        )
