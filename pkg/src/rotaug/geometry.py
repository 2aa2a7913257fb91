"""Planar geometry for box-label rotation.

Points, axis-aligned boxes, simple polygons, rigid rotations, IoU, and
convex clipping. Everything else in the package is built on these.

Coordinate convention: x grows right, y grows down (raster order), and a
positive angle rotates by the matrix ``[[cos, -sin], [sin, cos]]``, which
looks clockwise on screen under this convention. One convention, used
everywhere. All arithmetic is float64; default comparisons use an
absolute epsilon of 1e-9 pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EPS",
    "Point2",
    "AABox",
    "Polygon",
    "Rotation",
    "bbox_of",
    "box_polygon",
    "rotate_polygon",
    "iou_aabb",
    "polygon_area",
    "is_convex",
    "clip_polygon_to_convex",
    "inscribed_ellipse",
]

EPS = 1e-9


def _check_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class Point2:
    """A point in pixel coordinates (x right, y down)."""

    x: float
    y: float

    def __post_init__(self) -> None:
        _check_finite("Point2 coordinate", self.x, self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(frozen=True)
class AABox:
    """Axis-aligned box in pixel coordinates; degenerate boxes are rejected."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self) -> None:
        _check_finite("AABox coordinate", self.xmin, self.ymin, self.xmax, self.ymax)
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError(
                f"degenerate box: need xmin < xmax and ymin < ymax, got "
                f"({self.xmin}, {self.ymin}, {self.xmax}, {self.ymax})"
            )

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "AABox":
        return cls(x, y, x + w, y + h)

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Point2:
        return Point2((self.xmin + self.xmax) / 2.0, (self.ymin + self.ymax) / 2.0)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)

    def as_xywh(self) -> tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.width, self.height)

    def corners(self) -> np.ndarray:
        """Corner coordinates as a (4, 2) array, positively oriented."""
        return np.array(
            [
                [self.xmin, self.ymin],
                [self.xmax, self.ymin],
                [self.xmax, self.ymax],
                [self.xmin, self.ymax],
            ],
            dtype=np.float64,
        )

    def translated(self, dx: float, dy: float) -> "AABox":
        return AABox(self.xmin + dx, self.ymin + dy, self.xmax + dx, self.ymax + dy)

    def contains_box(self, other: "AABox", tol: float = EPS) -> bool:
        return (
            self.xmin <= other.xmin + tol
            and self.ymin <= other.ymin + tol
            and self.xmax >= other.xmax - tol
            and self.ymax >= other.ymax - tol
        )

    def intersection(self, other: "AABox") -> "AABox | None":
        xmin = max(self.xmin, other.xmin)
        ymin = max(self.ymin, other.ymin)
        xmax = min(self.xmax, other.xmax)
        ymax = min(self.ymax, other.ymax)
        if xmin < xmax and ymin < ymax:
            return AABox(xmin, ymin, xmax, ymax)
        return None


def _signed_area(vertices: np.ndarray) -> float:
    x = vertices[:, 0]
    y = vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


class Polygon:
    """Simple polygon as an ordered float64 vertex array.

    Vertex order is normalized to positive shoelace orientation
    (counter-clockwise in the x-right/y-down frame), keeping the first
    vertex first. Simplicity (no self-intersection) is the caller's
    responsibility; :meth:`validate_simple` checks it explicitly where
    the quadratic cost is acceptable.
    """

    __slots__ = ("_vertices",)

    def __init__(self, vertices, *, copy: bool = True) -> None:
        arr = np.array(vertices, dtype=np.float64, copy=copy)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError(f"vertices must have shape (n, 2), got {arr.shape}")
        if arr.shape[0] < 3:
            raise ValueError(f"polygon needs >= 3 vertices, got {arr.shape[0]}")
        if not np.isfinite(arr).all():
            raise ValueError("polygon vertices must be finite")
        s = _signed_area(arr)
        if s == 0.0:
            raise ValueError("polygon has zero signed area")
        if s < 0.0:
            arr = np.concatenate([arr[:1], arr[:0:-1]])
        arr.setflags(write=False)
        self._vertices = arr

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices

    def __len__(self) -> int:
        return self._vertices.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polygon):
            return NotImplemented
        return np.array_equal(self._vertices, other._vertices)

    def __hash__(self) -> int:
        return hash(self._vertices.tobytes())

    def __repr__(self) -> str:
        return f"Polygon(n={len(self)}, area={self.area:.6g})"

    @property
    def area(self) -> float:
        return abs(_signed_area(self._vertices))

    def validate_simple(self) -> None:
        """Raise ValueError if any two non-adjacent edges intersect. O(n^2)."""
        v = self._vertices
        n = len(v)
        a = v
        b = np.roll(v, -1, axis=0)
        for i in range(n):
            # skip adjacent edges (share a vertex)
            js = [j for j in range(i + 2, n) if not (i == 0 and j == n - 1)]
            if not js:
                continue
            js = np.array(js)
            if _segments_intersect(a[i], b[i], a[js], b[js]).any():
                raise ValueError(f"polygon is self-intersecting near edge {i}")


def _segments_intersect(p: np.ndarray, q: np.ndarray, r: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Proper/improper intersection test between segment pq and segments r->s."""

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (
            b[..., 1] - a[..., 1]
        ) * (c[..., 0] - a[..., 0])

    d1 = orient(r, s, p)
    d2 = orient(r, s, q)
    d3 = orient(np.broadcast_to(p, r.shape), np.broadcast_to(q, r.shape), r)
    d4 = orient(np.broadcast_to(p, s.shape), np.broadcast_to(q, s.shape), s)
    return ((d1 * d2) < 0) & ((d3 * d4) < 0)


@dataclass(frozen=True)
class Rotation:
    """Rigid rotation by ``theta`` radians about ``pivot``.

    ``theta`` is canonicalized into (-pi, pi].
    """

    theta: float
    pivot: Point2 = Point2(0.0, 0.0)

    def __post_init__(self) -> None:
        _check_finite("Rotation angle", self.theta)
        t = math.remainder(self.theta, math.tau)
        if t <= -math.pi:
            t += math.tau
        object.__setattr__(self, "theta", t)

    def matrix(self) -> np.ndarray:
        c = math.cos(self.theta)
        s = math.sin(self.theta)
        return np.array([[c, -s], [s, c]], dtype=np.float64)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Rotate an (n, 2) array of points about the pivot."""
        p = self.pivot.as_array()
        return (np.asarray(points, dtype=np.float64) - p) @ self.matrix().T + p


def bbox_of(poly: Polygon) -> AABox:
    """Tightest axis-aligned box around the polygon's vertices."""
    v = poly.vertices
    xmin, ymin = v.min(axis=0)
    xmax, ymax = v.max(axis=0)
    if not (xmin < xmax and ymin < ymax):
        raise ValueError("degenerate polygon: zero extent along an axis")
    return AABox(float(xmin), float(ymin), float(xmax), float(ymax))


def box_polygon(box: AABox) -> Polygon:
    """The box itself as a 4-vertex polygon."""
    return Polygon(box.corners(), copy=False)


def rotate_polygon(poly: Polygon, rot: Rotation) -> Polygon:
    """Rotate every vertex about the pivot; count and order are preserved."""
    return Polygon(rot.apply(poly.vertices), copy=False)


def iou_aabb(a: AABox, b: AABox) -> float:
    """Intersection-over-union of two axis-aligned boxes, in [0, 1]."""
    iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def polygon_area(poly: Polygon) -> float:
    """Shoelace area (absolute value)."""
    return poly.area


def is_convex(poly: Polygon, tol: float = 0.0) -> bool:
    """True if every vertex turn is a left turn (or collinear within tol).

    Assumes the normalized positive orientation of :class:`Polygon`.
    """
    v = poly.vertices
    e = np.roll(v, -1, axis=0) - v
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    return bool((cross >= -tol).all())


def clip_polygon_to_convex(poly: Polygon, clip: Polygon) -> Polygon | None:
    """Clip ``poly`` against a convex polygon (sequential half-plane clipping).

    Returns the intersection polygon, or None when it is empty or
    degenerate (zero area).
    """
    cv = clip.vertices
    span = float(np.abs(cv).max()) + 1.0
    if not is_convex(clip, tol=1e-9 * span * span):
        raise ValueError("clip polygon must be convex")

    output = [tuple(p) for p in poly.vertices]
    n = len(cv)
    for i in range(n):
        ax, ay = cv[i]
        bx, by = cv[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        if not output:
            return None
        points = output
        output = []
        sx, sy = points[-1]
        s_in = ex * (sy - ay) - ey * (sx - ax) >= 0.0
        for px, py in points:
            p_in = ex * (py - ay) - ey * (px - ax) >= 0.0
            if p_in != s_in:
                # edge crossing: intersect segment (s, p) with clip line (a, b)
                dx, dy = px - sx, py - sy
                denom = ex * dy - ey * dx
                t = (ex * (ay - sy) - ey * (ax - sx)) / denom
                output.append((sx + t * dx, sy + t * dy))
            if p_in:
                output.append((px, py))
            sx, sy, s_in = px, py, p_in
    if len(output) < 3:
        return None
    arr = np.asarray(output, dtype=np.float64)
    # drop consecutive near-duplicates produced by corner-grazing clips
    keep = np.any(np.abs(arr - np.roll(arr, 1, axis=0)) > 1e-12 * span, axis=1)
    arr = arr[keep]
    if arr.shape[0] < 3 or _signed_area(arr) == 0.0:
        return None
    return Polygon(arr, copy=False)


def inscribed_ellipse(box: AABox, m: int) -> Polygon:
    """The largest inscribed ellipse of ``box`` as an m-gon.

    Vertices sit at uniform parameter angles ``t_k = 2*pi*k/m`` on the
    ellipse centered at the box center with semi-axes (width/2, height/2).
    """
    if m < 8:
        raise ValueError(f"ellipse polygon needs m >= 8 vertices, got {m}")
    c = box.center
    a = box.width / 2.0
    b = box.height / 2.0
    t = np.arange(m, dtype=np.float64) * (2.0 * math.pi / m)
    verts = np.column_stack([c.x + a * np.cos(t), c.y + b * np.sin(t)])
    return Polygon(verts, copy=False)
