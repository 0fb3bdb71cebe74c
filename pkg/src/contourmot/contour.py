"""
Contour error between a ground-truth box and a predicted box.

For each box, a subset of corners is chosen (the corners nearest the ego
vehicle, or all of them in object-centric mode). Every chosen corner of one
box is measured against the solid region of the other box, and the contour
error is the largest of those distances in either direction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from contourmot.geometry import (
    _SIGNS_2D,
    _SIGNS_3D,
    DimensionError,
    EgoPose,
    OrientedBox,
    corners,
    points_to_box_distance,
)


# corner distances are rounded to this many decimals (1 nm) before ranking
TIE_DECIMALS = 9


def _signs(box: OrientedBox) -> np.ndarray:
    return _SIGNS_2D if box.dim == 2 else _SIGNS_3D


class Perspective(str, enum.Enum):
    EGO = "ego"
    OBJECT = "object"


@dataclass(frozen=True)
class ContourConfig:
    """How a contour error is computed.

    Attributes:
        dimension: 2 evaluates the bird's-eye-view footprint, 3 the full box.
        perspective: ego-centric selects the corners closest to the ego
            position (3 in 2D, 6 in 3D); object-centric uses every corner.
    """

    dimension: int = 3
    perspective: Perspective = Perspective.EGO

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.dimension}")
        object.__setattr__(self, "perspective", Perspective(self.perspective))

    @property
    def total_corners(self) -> int:
        return 4 if self.dimension == 2 else 8

    @property
    def corner_count(self) -> int:
        if self.perspective is Perspective.OBJECT:
            return self.total_corners
        return 3 if self.dimension == 2 else 6

    def project(self, box: OrientedBox) -> OrientedBox:
        """Bring a box to the configured dimension (3D boxes drop to BEV in 2D mode)."""
        if box.dim == self.dimension:
            return box
        if box.dim == 3 and self.dimension == 2:
            return box.bev()
        raise DimensionError(f"cannot evaluate a {box.dim}D box in {self.dimension}D mode")

    def project_ego(self, ego: Optional[EgoPose]) -> Optional[EgoPose]:
        if ego is None or ego.dim == self.dimension:
            return ego
        if ego.dim == 3 and self.dimension == 2:
            return ego.bev()
        raise DimensionError(f"cannot use a {ego.dim}D ego pose in {self.dimension}D mode")


def _require_ego(ego: Optional[EgoPose], config: ContourConfig) -> Optional[EgoPose]:
    if config.perspective is Perspective.EGO and ego is None:
        raise ValueError("ego-centric contour error needs an ego pose")
    return config.project_ego(ego)


def select_corners(
    box: OrientedBox, ego: Optional[EgoPose], config: ContourConfig
) -> np.ndarray:
    """Corners used for the contour error, nearest to the ego first.

    Distances are compared in the box frame and rounded to TIE_DECIMALS
    places, so corners equidistant from the ego (up to float noise) tie;
    ties keep the lower corner index (see `geometry.corners`).
    """
    box = config.project(box)
    ego = _require_ego(ego, config)
    pts = corners(box)
    if config.perspective is Perspective.OBJECT:
        return pts
    local = box.to_local(ego.position)
    dist = np.linalg.norm(_signs(box) * box.half_extents - local, axis=1)
    dist = np.round(dist, TIE_DECIMALS)
    order = np.argsort(dist, kind="stable")
    return pts[order[: config.corner_count]]


def contour_error(
    gt: OrientedBox,
    pred: OrientedBox,
    ego: Optional[EgoPose],
    config: ContourConfig = ContourConfig(),
) -> float:
    """Contour error in meters; 0 for identical boxes."""
    gt = config.project(gt)
    pred = config.project(pred)
    if gt.dim != pred.dim:
        raise DimensionError(f"dimension mismatch: {gt.dim} vs {pred.dim}")
    pred_to_gt = points_to_box_distance(select_corners(pred, ego, config), gt).max()
    gt_to_pred = points_to_box_distance(select_corners(gt, ego, config), pred).max()
    return float(max(pred_to_gt, gt_to_pred))


def is_match(
    gt: OrientedBox,
    pred: OrientedBox,
    ego: Optional[EgoPose],
    config: ContourConfig,
    tau_e: float,
) -> bool:
    """True when the contour error is at most `tau_e` meters (inclusive)."""
    if not tau_e > 0:
        raise ValueError(f"contour threshold must be > 0, got {tau_e}")
    return contour_error(gt, pred, ego, config) <= tau_e
