"""
Cost matrices, optimal assignment and threshold gating for one frame.

All three matching criteria go through the same path: a cost matrix with one
row per ground-truth box and one column per prediction, a minimum-cost
assignment over the full matrix, and a threshold gate applied afterwards.
IoU is turned into a cost as ``1 - IoU``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from contourmot.contour import ContourConfig, contour_error
from contourmot.geometry import EgoPose, OrientedBox, cpd, iou


class Metric(str, enum.Enum):
    CE = "ce"
    IOU = "iou"
    CPD = "cpd"


def pair_cost(
    gt: OrientedBox,
    pred: OrientedBox,
    ego: Optional[EgoPose],
    metric: Metric,
    config: ContourConfig,
) -> float:
    metric = Metric(metric)
    if metric is Metric.CE:
        return contour_error(gt, pred, ego, config)
    gt, pred = config.project(gt), config.project(pred)
    if metric is Metric.IOU:
        return 1.0 - iou(gt, pred)
    return cpd(gt, pred)


def cost_matrix(
    gt_boxes: Sequence[OrientedBox],
    pred_boxes: Sequence[OrientedBox],
    ego: Optional[EgoPose],
    metric: Metric,
    config: ContourConfig,
) -> np.ndarray:
    """Pairwise costs, shape (len(gt_boxes), len(pred_boxes))."""
    costs = np.zeros((len(gt_boxes), len(pred_boxes)))
    for i, gt in enumerate(gt_boxes):
        for j, pred in enumerate(pred_boxes):
            costs[i, j] = pair_cost(gt, pred, ego, metric, config)
    return costs


def build_cost_matrix(frame, metric: Metric, config: ContourConfig) -> np.ndarray:
    """Cost matrix for every GT/prediction pair of a frame."""
    return cost_matrix(
        [obj.box for obj in frame.gt], [obj.box for obj in frame.pred], frame.ego, metric, config
    )


def validate_costs(costs) -> np.ndarray:
    arr = np.asarray(costs, dtype=float)
    if arr.ndim != 2:
        if arr.size == 0:
            return arr.reshape(0, 0)
        raise ValueError(f"cost matrix must be 2D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("cost matrix contains non-finite entries")
    if np.any(arr < 0):
        raise ValueError("cost matrix contains negative entries")
    return arr


def _solve_wide(costs: np.ndarray) -> List[int]:
    """Shortest-augmenting-path Hungarian method for n <= m.

    Returns the column assigned to each row. Rows are inserted one at a time
    and columns are scanned left to right, so equal-cost alternatives resolve
    to the first one found.
    """
    n, m = costs.shape
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    owner = [0] * (m + 1)  # owner[j]: 1-based row matched to column j, 0 = free
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = [math.inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = owner[j0]
            row = costs[i0 - 1]
            delta = math.inf
            j1 = 0
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[owner[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    assigned = [-1] * n
    for j in range(1, m + 1):
        if owner[j]:
            assigned[owner[j] - 1] = j - 1
    return assigned


def hungarian(costs) -> List[Tuple[int, int]]:
    """Minimum-cost assignment of size min(n, m), as (row, col) pairs sorted by row."""
    arr = validate_costs(costs)
    n, m = arr.shape
    if n == 0 or m == 0:
        return []
    if n <= m:
        cols = _solve_wide(arr)
        return [(r, c) for r, c in enumerate(cols)]
    rows = _solve_wide(arr.T)
    return sorted((r, c) for c, r in enumerate(rows))


def assignment_cost(costs, pairs: Sequence[Tuple[int, int]]) -> float:
    arr = np.asarray(costs, dtype=float)
    return float(sum(arr[r, c] for r, c in pairs))


@dataclass
class MatchResult:
    """Outcome of gated assignment for one frame.

    ``matched`` holds (gt_index, pred_index, cost) triples sorted by gt index.
    """

    matched: List[Tuple[int, int, float]] = field(default_factory=list)
    unmatched_gt: List[int] = field(default_factory=list)
    unmatched_pred: List[int] = field(default_factory=list)

    def pairs(self) -> List[Tuple[int, int]]:
        return [(i, j) for i, j, _ in self.matched]


def max_cost_for(metric: Metric, tau: float) -> float:
    """Largest admissible cost for a metric threshold.

    CE and CPD thresholds are distances in meters; the IoU threshold is a
    minimum overlap, so the cost bound is ``1 - tau``.
    """
    metric = Metric(metric)
    if not (isinstance(tau, (int, float)) and math.isfinite(tau) and tau > 0):
        raise ValueError(f"threshold must be a positive number, got {tau!r}")
    if metric is Metric.IOU:
        if tau > 1:
            raise ValueError(f"IoU threshold must lie in (0, 1], got {tau}")
        return 1.0 - tau
    return float(tau)


def gate_matches(
    assignment: Sequence[Tuple[int, int]],
    costs,
    tau: float,
    metric: Metric = Metric.CE,
) -> MatchResult:
    """Split an assignment into accepted pairs and unmatched indices."""
    arr = validate_costs(costs)
    n, m = arr.shape
    limit = max_cost_for(metric, tau)
    result = MatchResult()
    used_gt, used_pred = set(), set()
    for r, c in sorted(assignment):
        cost = float(arr[r, c])
        if cost <= limit:
            result.matched.append((r, c, cost))
            used_gt.add(r)
            used_pred.add(c)
    result.unmatched_gt = [i for i in range(n) if i not in used_gt]
    result.unmatched_pred = [j for j in range(m) if j not in used_pred]
    return result


def match(costs, tau: float, metric: Metric = Metric.CE) -> MatchResult:
    """Assign on the full matrix, then gate."""
    return gate_matches(hungarian(costs), costs, tau, metric)
