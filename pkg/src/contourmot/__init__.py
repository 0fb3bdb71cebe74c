"""Contour-error matching and ego-centric diagnostics for 3D multi-object tracking evaluation."""

from contourmot.assignment import Metric, MatchResult, build_cost_matrix, gate_matches, hungarian
from contourmot.contour import ContourConfig, Perspective, contour_error, is_match, select_corners
from contourmot.geometry import EgoPose, OrientedBox, corners, cpd, iou, point_to_box_distance
from contourmot.metrics import EvalReport, MetricRecord, eod, tde

__all__ = [
    "ContourConfig",
    "EgoPose",
    "EvalReport",
    "MatchResult",
    "Metric",
    "MetricRecord",
    "OrientedBox",
    "Perspective",
    "build_cost_matrix",
    "contour_error",
    "corners",
    "cpd",
    "eod",
    "gate_matches",
    "hungarian",
    "iou",
    "is_match",
    "point_to_box_distance",
    "select_corners",
    "tde",
]

__version__ = "0.1.0"
