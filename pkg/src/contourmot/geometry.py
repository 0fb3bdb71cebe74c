"""
Oriented bounding boxes and the baseline pairwise metrics.

Boxes are yaw-only: a 2D box is a rotated rectangle in the ground plane, a 3D
box is that rectangle extruded along z. Extents are full lengths ordered
(length, width[, height]) with length along the heading direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

# intersections with area below this are treated as empty (m^2)
AREA_EPS = 1e-12

# local-frame corner signs; counterclockwise seen from above, bottom face first
_SIGNS_2D = np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
_SIGNS_3D = np.array(
    [[sx, sy, sz] for sz in (-1.0, 1.0) for sx, sy in _SIGNS_2D]
)


class DimensionError(ValueError):
    """Raised when points/boxes of different dimensionality are combined."""


def normalize_angle(angle: float) -> float:
    """Wrap an angle in radians to (-pi, pi]."""
    if -math.pi < angle <= math.pi:
        return angle
    wrapped = math.pi - math.fmod(math.pi - angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    elif wrapped > math.pi:
        wrapped -= 2.0 * math.pi
    return wrapped


def angle_difference(a: float, b: float) -> float:
    """Absolute wrapped difference between two headings, in [0, pi]."""
    return abs(normalize_angle(a - b))


def as_point(coords: Sequence[float]) -> np.ndarray:
    point = np.asarray(coords, dtype=float).reshape(-1)
    if point.shape[0] not in (2, 3):
        raise DimensionError(f"points must have 2 or 3 coordinates, got {point.shape[0]}")
    if not np.all(np.isfinite(point)):
        raise ValueError(f"non-finite point coordinates: {point.tolist()}")
    point.flags.writeable = False
    return point


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise DimensionError(f"dimension mismatch: {a} vs {b}")


def _rotation(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class OrientedBox:
    """A yaw-rotated box in 2D or 3D.

    Attributes:
        center: (x, y) or (x, y, z) in meters.
        extents: full side lengths (length, width[, height]) in meters.
        yaw: heading about the vertical axis in radians, stored in (-pi, pi].
    """

    center: np.ndarray
    extents: np.ndarray
    yaw: float = 0.0

    def __post_init__(self):
        center = as_point(self.center)
        extents = np.asarray(self.extents, dtype=float).reshape(-1)
        if extents.shape != center.shape:
            raise DimensionError(
                f"extents have {extents.shape[0]} entries but center has {center.shape[0]}"
            )
        if not np.all(np.isfinite(extents)) or np.any(extents <= 0):
            raise ValueError(f"extents must be finite and > 0, got {extents.tolist()}")
        if not math.isfinite(self.yaw):
            raise ValueError("yaw must be finite")
        extents.flags.writeable = False
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "yaw", normalize_angle(float(self.yaw)))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def half_extents(self) -> np.ndarray:
        return self.extents / 2.0

    def volume(self) -> float:
        """Area in 2D, volume in 3D."""
        return float(np.prod(self.extents))

    def corners(self) -> np.ndarray:
        return corners(self)

    def bev(self) -> "OrientedBox":
        """Bird's-eye-view footprint (z and height dropped)."""
        if self.dim == 2:
            return self
        return OrientedBox(self.center[:2], self.extents[:2], self.yaw)

    def to_local(self, points: np.ndarray) -> np.ndarray:
        """Express world points (N, dim) or (dim,) in the box frame."""
        pts = np.asarray(points, dtype=float)
        _check_dims(pts.shape[-1], self.dim)
        rel = pts - self.center
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        local = rel.copy()
        local[..., 0] = c * rel[..., 0] + s * rel[..., 1]
        local[..., 1] = -s * rel[..., 0] + c * rel[..., 1]
        return local

    def contains(self, point: Sequence[float], tol: float = 1e-9) -> bool:
        local = self.to_local(as_point(point))
        return bool(np.all(np.abs(local) <= self.half_extents + tol))

    def transformed(self, rotation: float, translation: Sequence[float]) -> "OrientedBox":
        """Rotate about the origin's vertical axis, then translate."""
        center = rigid_transform(self.center, rotation, translation)
        return OrientedBox(center, self.extents, self.yaw + rotation)

    def translated(self, offset: Sequence[float]) -> "OrientedBox":
        return OrientedBox(self.center + np.asarray(offset, dtype=float), self.extents, self.yaw)

    def __eq__(self, other):
        if not isinstance(other, OrientedBox):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.center, other.center)
            and np.array_equal(self.extents, other.extents)
            and self.yaw == other.yaw
        )

    def __hash__(self):
        return hash((tuple(self.center), tuple(self.extents), self.yaw))

    def __repr__(self):
        return (
            f"OrientedBox(center={self.center.tolist()}, "
            f"extents={self.extents.tolist()}, yaw={self.yaw:.6g})"
        )


@dataclass(frozen=True, eq=False)
class EgoPose:
    """Ego vehicle pose. Only the position enters the contour error."""

    position: np.ndarray
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", as_point(self.position))
        object.__setattr__(self, "yaw", normalize_angle(float(self.yaw)))

    @property
    def dim(self) -> int:
        return self.position.shape[0]

    def bev(self) -> "EgoPose":
        if self.dim == 2:
            return self
        return EgoPose(self.position[:2], self.yaw)

    def transformed(self, rotation: float, translation: Sequence[float]) -> "EgoPose":
        return EgoPose(rigid_transform(self.position, rotation, translation), self.yaw + rotation)

    def __eq__(self, other):
        if not isinstance(other, EgoPose):
            return NotImplemented
        return np.array_equal(self.position, other.position) and self.yaw == other.yaw

    def __hash__(self):
        return hash((tuple(self.position), self.yaw))

    def __repr__(self):
        return f"EgoPose(position={self.position.tolist()}, yaw={self.yaw:.6g})"


def rigid_transform(points: np.ndarray, rotation: float, translation: Sequence[float]) -> np.ndarray:
    """Rotate points about the vertical axis through the origin, then translate."""
    pts = np.asarray(points, dtype=float)
    out = pts.copy()
    out[..., :2] = pts[..., :2] @ _rotation(rotation).T
    return out + np.asarray(translation, dtype=float)


def corners(box: OrientedBox) -> np.ndarray:
    """Corner points of a box, shape (4, 2) in 2D or (8, 3) in 3D.

    Order in the box frame: (+l, +w), (-l, +w), (-l, -w), (+l, -w), i.e.
    counterclockwise from the front-left corner. In 3D the four bottom corners
    come first, followed by the four top corners in the same order.
    """
    signs = _SIGNS_2D if box.dim == 2 else _SIGNS_3D
    local = signs * box.half_extents
    return rigid_transform(local, box.yaw, box.center)


def point_to_box_distance(point: Sequence[float], box: OrientedBox) -> float:
    """Euclidean distance from a point to the solid box (0 inside or on it)."""
    p = as_point(point)
    _check_dims(p.shape[0], box.dim)
    local = box.to_local(p)
    half = box.half_extents
    residual = local - np.clip(local, -half, half)
    return float(np.sqrt(np.dot(residual, residual)))


def points_to_box_distance(points: np.ndarray, box: OrientedBox) -> np.ndarray:
    """Vectorized `point_to_box_distance` over an (N, dim) array."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    _check_dims(pts.shape[1], box.dim)
    local = box.to_local(pts)
    half = box.half_extents
    residual = local - np.clip(local, -half, half)
    return np.sqrt(np.einsum("ij,ij->i", residual, residual))


def cpd(a: OrientedBox, b: OrientedBox) -> float:
    """Center-point distance in meters."""
    _check_dims(a.dim, b.dim)
    return math.dist(a.center, b.center)


# ---------------------------------------------------------------- polygons

def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _line_intersection(s, e, c1, c2):
    # intersection of segment s->e with the infinite line c1->c2
    ds = (e[0] - s[0], e[1] - s[1])
    dc = (c2[0] - c1[0], c2[1] - c1[1])
    denom = ds[0] * dc[1] - ds[1] * dc[0]
    t = ((c1[0] - s[0]) * dc[1] - (c1[1] - s[1]) * dc[0]) / denom
    return (s[0] + t * ds[0], s[1] + t * ds[1])


def clip_convex(subject: Sequence, clip: Sequence) -> List[tuple]:
    """Sutherland-Hodgman clipping of a polygon by a convex CCW polygon."""
    output = [tuple(p) for p in subject]
    clip = [tuple(p) for p in clip]
    for k in range(len(clip)):
        if not output:
            break
        c1, c2 = clip[k - 1], clip[k]
        polygon, output = output, []
        s = polygon[-1]
        s_in = _cross(c1, c2, s) >= 0.0
        for e in polygon:
            e_in = _cross(c1, c2, e) >= 0.0
            if e_in:
                if not s_in:
                    output.append(_line_intersection(s, e, c1, c2))
                output.append(e)
            elif s_in:
                output.append(_line_intersection(s, e, c1, c2))
            s, s_in = e, e_in
    return output


def polygon_area(polygon: Sequence) -> float:
    """Unsigned shoelace area."""
    if len(polygon) < 3:
        return 0.0
    total = 0.0
    for (x0, y0), (x1, y1) in zip(polygon, list(polygon[1:]) + [polygon[0]]):
        total += x0 * y1 - x1 * y0
    return abs(total) / 2.0


def bev_intersection_area(a: OrientedBox, b: OrientedBox) -> float:
    poly = clip_convex(corners(a.bev()), corners(b.bev()))
    area = polygon_area(poly)
    return area if area > AREA_EPS else 0.0


def iou(a: OrientedBox, b: OrientedBox) -> float:
    """Intersection over union of two oriented boxes (area in 2D, volume in 3D)."""
    _check_dims(a.dim, b.dim)
    inter = bev_intersection_area(a, b)
    if a.dim == 3 and inter > 0.0:
        lo = max(a.center[2] - a.half_extents[2], b.center[2] - b.half_extents[2])
        hi = min(a.center[2] + a.half_extents[2], b.center[2] + b.half_extents[2])
        inter *= max(0.0, hi - lo)
    if inter <= 0.0:
        return 0.0
    union = a.volume() + b.volume() - inter
    return float(min(1.0, max(0.0, inter / union)))
