"""
Scene-level evaluation: matching per frame and class, accumulation, reports.

Matching is done separately for each class label. Besides the gated matching
of each criterion, every frame also gets a reference pairing: contour-error
assignment gated at the class's (wide) scatter window. The reference pairs
provide the yaw error used for yaw binning, and the pair records behind the
scatter, quadrant and correlation outputs, so all criteria are compared on
the same population.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

from contourmot.assignment import Metric, cost_matrix, match
from contourmot.contour import ContourConfig
from contourmot.metrics import (
    DEFAULT_THRESHOLDS,
    DISTANCE_EDGES,
    YAW_EDGES,
    ClassThresholds,
    Counts,
    EvalReport,
    GTOutcome,
    MetricRecord,
    SceneCounts,
    accumulate_frame,
    bin_by_distance,
    bin_by_yaw,
    correlation_table,
    count_outcomes_by_distance,
    distance_to_ego,
    make_record,
    quadrant_classify,
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EvalConfig:
    contour: ContourConfig = ContourConfig()
    classes: Optional[Sequence[str]] = None  # None: every class present
    thresholds: Mapping[str, ClassThresholds] = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    distance_edges: Sequence[float] = DISTANCE_EDGES
    yaw_edges: Sequence[float] = YAW_EDGES
    yaw_max_distance: Optional[float] = None

    def thresholds_for(self, label: str) -> ClassThresholds:
        try:
            return self.thresholds[label]
        except KeyError:
            raise ConfigError(
                f"no thresholds configured for class {label!r}; "
                f"known classes: {', '.join(sorted(self.thresholds))}"
            ) from None


@dataclass
class FrameOutcome:
    """Everything one frame contributes to the reports of several criteria."""

    counts: Dict[Metric, Counts]
    records: Dict[Metric, List[MetricRecord]]
    outcomes: Dict[Metric, List[GTOutcome]]
    reference: List[MetricRecord]


def _subframe(frame, label: str):
    return dataclasses.replace(
        frame,
        gt=[o for o in frame.gt if o.class_label == label],
        pred=[o for o in frame.pred if o.class_label == label],
    )


def frame_classes(frame, config: EvalConfig) -> List[str]:
    present = {o.class_label for o in frame.gt} | {o.class_label for o in frame.pred}
    if config.classes is not None:
        present &= set(config.classes)
    return sorted(present)


def reference_pairs(frame, config: EvalConfig, label: str, ce_costs=None):
    """Contour-error pairing of one class, gated at the scatter window."""
    th = config.thresholds_for(label)
    if ce_costs is None:
        ce_costs = cost_matrix(
            [o.box for o in frame.gt], [o.box for o in frame.pred], frame.ego, Metric.CE, config.contour
        )
    return match(ce_costs, th.scatter_window, Metric.CE), ce_costs


def scene_matches(scene, label: str, config: EvalConfig) -> List[MetricRecord]:
    """Records of contour-gated matches of one class across a scene."""
    records = []
    prev: Dict[str, str] = {}
    th = config.thresholds_for(label)
    for frame in scene.frames:
        sub = _subframe(frame, label)
        if not sub.gt or not sub.pred:
            continue
        costs = cost_matrix([o.box for o in sub.gt], [o.box for o in sub.pred], sub.ego, Metric.CE, config.contour)
        result = match(costs, th.ce, Metric.CE)
        _, prev, recs = accumulate_frame(result, sub, prev, config.contour)
        records.extend(recs)
    return records


def evaluate_frame(
    frame,
    metrics: Sequence[Metric],
    config: EvalConfig,
    prev: Dict[Metric, Dict[str, str]],
) -> FrameOutcome:
    """Match one frame under each criterion; `prev` is updated in place."""
    out = FrameOutcome(
        counts={m: Counts() for m in metrics},
        records={m: [] for m in metrics},
        outcomes={m: [] for m in metrics},
        reference=[],
    )
    for label in frame_classes(frame, config):
        sub = _subframe(frame, label)
        th = config.thresholds_for(label)
        gt_boxes = [o.box for o in sub.gt]
        pred_boxes = [o.box for o in sub.pred]
        ref, ce_costs = reference_pairs(sub, config, label)
        ref_yaw: Dict[int, float] = {}
        for i, j, cost in ref.matched:
            rec = make_record(sub.scene_id, sub.frame_index, sub.gt[i], sub.pred[j], sub.ego, config.contour, ce=cost)
            out.reference.append(rec)
            ref_yaw[i] = rec.yaw_error
        ego = config.contour.project_ego(sub.ego)
        ranges = [distance_to_ego(config.contour.project(b), ego) for b in gt_boxes]
        for metric in metrics:
            if metric is Metric.CE:
                costs = ce_costs
            else:
                costs = cost_matrix(gt_boxes, pred_boxes, sub.ego, metric, config.contour)
            result = match(costs, th.gate(metric), metric)
            counts, prev[metric], recs = accumulate_frame(result, sub, prev[metric], config.contour)
            out.counts[metric] += counts
            out.records[metric].extend(recs)
            matched = {i for i, _, _ in result.matched}
            for i, obj in enumerate(sub.gt):
                out.outcomes[metric].append(GTOutcome(
                    scene_id=sub.scene_id,
                    frame_index=sub.frame_index,
                    gt_id=obj.track_id,
                    class_label=label,
                    gt_to_ego=ranges[i],
                    matched=i in matched,
                    yaw_error=ref_yaw.get(i),
                ))
    return out


@dataclass
class Evaluation:
    """Reports per criterion plus the shared reference records."""

    reports: Dict[Metric, EvalReport]
    records: Dict[Metric, List[MetricRecord]]
    outcomes: Dict[Metric, List[GTOutcome]]
    reference: List[MetricRecord]


def evaluate(
    scenes: Sequence,
    metrics: Sequence[Metric] = (Metric.CE, Metric.IOU, Metric.CPD),
    config: EvalConfig = EvalConfig(),
) -> Evaluation:
    """Evaluate scenes (processed in scene_id order) under each criterion."""
    metrics = [Metric(m) for m in metrics]
    if not metrics:
        raise ConfigError("at least one metric is required")
    all_records = {m: [] for m in metrics}
    all_outcomes = {m: [] for m in metrics}
    reference: List[MetricRecord] = []
    scene_counts = {m: [] for m in metrics}
    classes = set()
    totals = {"frames": 0, "gt": 0, "pred": 0}
    for scene in sorted(scenes, key=lambda s: s.scene_id):
        prev = {m: {} for m in metrics}
        per_scene = {m: SceneCounts(scene.scene_id) for m in metrics}
        for frame in scene.frames:
            labels = frame_classes(frame, config)
            classes.update(labels)
            n_gt = sum(1 for o in frame.gt if o.class_label in labels)
            n_pred = sum(1 for o in frame.pred if o.class_label in labels)
            totals["frames"] += 1
            totals["gt"] += n_gt
            totals["pred"] += n_pred
            result = evaluate_frame(frame, metrics, config, prev)
            reference.extend(result.reference)
            for m in metrics:
                sc = per_scene[m]
                sc.frames += 1
                sc.gt += n_gt
                sc.pred += n_pred
                sc.counts += result.counts[m]
                all_records[m].extend(result.records[m])
                all_outcomes[m].extend(result.outcomes[m])
        for m in metrics:
            scene_counts[m].append(per_scene[m])

    labels = sorted(classes)
    quadrants = {}
    for label in labels:
        quadrants[label] = quadrant_classify(
            [r for r in reference if r.class_label == label], config.thresholds
        )
    correlations = correlation_table(reference, config.thresholds)

    reports = {}
    for m in metrics:
        counts = Counts()
        for sc in scene_counts[m]:
            counts += sc.counts
        bins = bin_by_distance(all_records[m], config.distance_edges)
        count_outcomes_by_distance(all_outcomes[m], bins)
        yaw_bins, unbinned = bin_by_yaw(all_outcomes[m], config.yaw_edges, config.yaw_max_distance)
        reports[m] = EvalReport(
            metric=m.value,
            dimension=config.contour.dimension,
            perspective=config.contour.perspective.value,
            classes=labels,
            thresholds={label: config.thresholds_for(label).gate(m) for label in labels},
            frames=totals["frames"],
            gt=totals["gt"],
            pred=totals["pred"],
            counts=counts,
            scenes=scene_counts[m],
            distance_bins=bins,
            yaw_bins=yaw_bins,
            yaw_unbinned=unbinned,
            yaw_max_distance=config.yaw_max_distance,
            quadrants=dict(quadrants),
            correlations={k: dict(v) for k, v in correlations.items()},
        )
    return Evaluation(reports, all_records, all_outcomes, reference)
