"""Label-rotation methods.

Given an axis-aligned box and an angle, each method proposes the
axis-aligned label for the rotated scene:

- ``largest``: bounding box of the rotated box itself. Guarantees
  containment, overestimates size at large angles.
- ``ellipse``: bounding box of the rotated largest inscribed ellipse.
- ``octagon``: corner-cut octagon interpolating between the box (s=0)
  and the side-midpoint diamond (s=0.5).
- ``random``: bounding box of a rotated random valid shape.
- ``rotiou``: the axis-aligned box maximizing IoU with the rotated
  (oriented) box, found numerically.
- ``perfect``: bounding box of the rotated true shape; needs the shape.

Labels are computed pivot-locally (rotation about the box center) and
then translated by the frame map, which is exact for rigid motions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    AABox,
    Point2,
    Polygon,
    Rotation,
    bbox_of,
    box_polygon,
    rotate_polygon,
)
from .sampling import ShapeDistConfig, sample_valid_shape

__all__ = [
    "METHODS",
    "FrameSpec",
    "FrameTransform",
    "frame_transform",
    "rotate_label",
    "octagon_shape",
    "random_valid_label",
    "rotiou_label",
    "RotIoUDidNotConverge",
    "clip_box_to_frame",
]

METHODS = ("largest", "ellipse", "octagon", "random", "rotiou", "perfect")

_SHAPE_BBOX_TOL = 1e-6


@dataclass(frozen=True)
class FrameSpec:
    """Image canvas: dimensions, rotation pivot, and canvas policy.

    ``expand`` grows the output canvas to hold the rotated input and
    always pivots about the image center; ``keep`` retains the input
    canvas and pivots about ``pivot`` (image center when omitted).
    """

    width: float
    height: float
    mode: str = "expand"
    pivot: Point2 | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("expand", "keep"):
            raise ValueError(f"mode must be 'expand' or 'keep', got {self.mode!r}")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("frame dimensions must be positive")

    @property
    def center(self) -> Point2:
        return Point2(self.width / 2.0, self.height / 2.0)

    def pivot_point(self) -> Point2:
        return self.pivot if self.pivot is not None else self.center

    def box(self) -> AABox:
        return AABox(0.0, 0.0, self.width, self.height)


@dataclass(frozen=True)
class FrameTransform:
    """Rigid map of image content: rotation about a pivot, then a shift."""

    rotation: Rotation
    translation: tuple[float, float]
    frame_out: FrameSpec

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        return self.rotation.apply(points) + np.asarray(self.translation)

    def apply_point(self, p: Point2) -> Point2:
        q = self.apply_points(np.array([[p.x, p.y]]))[0]
        return Point2(float(q[0]), float(q[1]))

    def apply_polygon(self, poly: Polygon) -> Polygon:
        return Polygon(self.apply_points(poly.vertices), copy=False)


def frame_transform(frame: FrameSpec, theta: float) -> FrameTransform:
    """The rigid map induced by rotating the image by ``theta``.

    In expand mode the output canvas is ``W' = W|cos| + H|sin|`` by
    ``H' = W|sin| + H|cos|`` (rounded to whole pixels) and content is
    re-centered; in keep mode the canvas and pivot are unchanged.
    """
    if frame.mode == "expand":
        c = abs(math.cos(theta))
        s = abs(math.sin(theta))
        w_out = float(round(frame.width * c + frame.height * s))
        h_out = float(round(frame.width * s + frame.height * c))
        out = FrameSpec(w_out, h_out, mode="expand")
        ci = frame.center
        co = out.center
        return FrameTransform(
            rotation=Rotation(theta, ci),
            translation=(co.x - ci.x, co.y - ci.y),
            frame_out=out,
        )
    return FrameTransform(
        rotation=Rotation(theta, frame.pivot_point()),
        translation=(0.0, 0.0),
        frame_out=frame,
    )


def octagon_shape(box: AABox, s: float) -> Polygon:
    """Corner-cut octagon: each corner is cut back by (s*W, s*H).

    s=0 degenerates to the box corners, s=0.5 to the side-midpoint
    diamond; duplicate vertices at the extremes are removed.
    """
    if not 0.0 <= s <= 0.5:
        raise ValueError(f"octagon scale must be in [0, 0.5], got {s}")
    dx = s * box.width
    dy = s * box.height
    pts = np.array(
        [
            [box.xmin + dx, box.ymin],
            [box.xmax - dx, box.ymin],
            [box.xmax, box.ymin + dy],
            [box.xmax, box.ymax - dy],
            [box.xmax - dx, box.ymax],
            [box.xmin + dx, box.ymax],
            [box.xmin, box.ymax - dy],
            [box.xmin, box.ymin + dy],
        ]
    )
    span = max(abs(box.width), abs(box.height))
    keep = np.any(np.abs(pts - np.roll(pts, 1, axis=0)) > 1e-12 * span, axis=1)
    return Polygon(pts[keep], copy=False)


def _half_extents_largest(a: float, b: float, theta: float) -> tuple[float, float]:
    c = abs(math.cos(theta))
    s = abs(math.sin(theta))
    return a * c + b * s, a * s + b * c


def _half_extents_ellipse(a: float, b: float, theta: float) -> tuple[float, float]:
    c2 = math.cos(theta) ** 2
    s2 = math.sin(theta) ** 2
    return math.sqrt(a * a * c2 + b * b * s2), math.sqrt(a * a * s2 + b * b * c2)


def _centered_box(cx: float, cy: float, hx: float, hy: float) -> AABox:
    return AABox(cx - hx, cy - hy, cx + hx, cy + hy)


def _pivot_local_label(
    method: str,
    box: AABox,
    theta: float,
    *,
    shape: Polygon | None,
    octagon_s: float,
    shape_cfg: ShapeDistConfig | None,
    draw_index: int,
) -> AABox:
    c = box.center
    a = box.width / 2.0
    b = box.height / 2.0
    if method == "largest":
        hx, hy = _half_extents_largest(a, b, theta)
        return _centered_box(c.x, c.y, hx, hy)
    if method == "ellipse":
        hx, hy = _half_extents_ellipse(a, b, theta)
        return _centered_box(c.x, c.y, hx, hy)
    if method == "octagon":
        poly = octagon_shape(box, octagon_s)
        return bbox_of(rotate_polygon(poly, Rotation(theta, c)))
    if method == "random":
        cfg = shape_cfg if shape_cfg is not None else ShapeDistConfig()
        poly = sample_valid_shape(box, cfg, draw_index)
        return bbox_of(rotate_polygon(poly, Rotation(theta, c)))
    if method == "rotiou":
        return _rotiou_pivot_local(box, theta)
    if method == "perfect":
        assert shape is not None
        return bbox_of(rotate_polygon(shape, Rotation(theta, c)))
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def rotate_label(
    method: str,
    box: AABox,
    theta: float,
    frame: FrameSpec | None = None,
    *,
    shape: Polygon | None = None,
    octagon_s: float = 0.25,
    shape_cfg: ShapeDistConfig | None = None,
    draw_index: int = 0,
) -> AABox:
    """Rotated-scene label for ``box`` under the given method.

    Parameters
    ----------
    method : one of ``METHODS``.
    box : the original axis-aligned box.
    theta : rotation angle in radians.
    frame : optional canvas; None computes the pivot-local label (the
        box center stays fixed), which is what IoU-based comparisons
        need since both sides share the frame translation.
    shape : the true object shape; required by (and only accepted for)
        the ``perfect`` method. Its bounding box must match ``box``.
    octagon_s : corner-cut fraction for the ``octagon`` method.
    shape_cfg, draw_index : randomness for the ``random`` method.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    if method == "perfect":
        if shape is None:
            raise ValueError("the 'perfect' method requires the object shape")
        sb = bbox_of(shape)
        if max(
            abs(sb.xmin - box.xmin),
            abs(sb.ymin - box.ymin),
            abs(sb.xmax - box.xmax),
            abs(sb.ymax - box.ymax),
        ) > _SHAPE_BBOX_TOL:
            raise ValueError(
                "shape bounding box does not match the label box "
                f"(got {sb.as_tuple()}, expected {box.as_tuple()})"
            )
    elif shape is not None:
        raise ValueError(f"method {method!r} does not accept a shape")

    theta_c = Rotation(theta).theta
    if theta_c == 0.0:
        label = box
    else:
        label = _pivot_local_label(
            method,
            box,
            theta,
            shape=shape,
            octagon_s=octagon_s,
            shape_cfg=shape_cfg,
            draw_index=draw_index,
        )
    if frame is None:
        return label
    t = frame_transform(frame, theta)
    c = box.center
    c_new = t.apply_point(c)
    return label.translated(c_new.x - c.x, c_new.y - c.y)


def random_valid_label(
    box: AABox,
    theta: float,
    cfg: ShapeDistConfig,
    draw_index: int,
    frame: FrameSpec | None = None,
) -> AABox:
    """Label from one random valid shape; deterministic per draw index."""
    return rotate_label(
        "random", box, theta, frame, shape_cfg=cfg, draw_index=draw_index
    )


class RotIoUDidNotConverge(RuntimeError):
    """Raised when the rotated-IoU search hits its iteration cap.

    Carries the best iterate found so far in ``best_box`` / ``best_iou``.
    """

    def __init__(self, best_box: AABox, best_iou: float):
        super().__init__(
            f"rotated-IoU search did not converge (best IoU {best_iou:.6f})"
        )
        self.best_box = best_box
        self.best_iou = best_iou


def _clip_area_to_box(
    pts: list[tuple[float, float]],
    xmin: float,
    ymin: float,
    xmax: float,
    ymax: float,
) -> float:
    """Area of a convex polygon clipped to an axis-aligned box.

    Specialized sequential half-plane clipping on vertex tuples; the
    solver below calls this thousands of times per search, so it avoids
    polygon-object churn.
    """
    for axis, bound, keep_ge in (
        (0, xmin, True),
        (0, xmax, False),
        (1, ymin, True),
        (1, ymax, False),
    ):
        if not pts:
            return 0.0
        out: list[tuple[float, float]] = []
        sx, sy = pts[-1]
        s_val = sx if axis == 0 else sy
        s_in = s_val >= bound if keep_ge else s_val <= bound
        for px, py in pts:
            p_val = px if axis == 0 else py
            p_in = p_val >= bound if keep_ge else p_val <= bound
            if p_in != s_in:
                t = (bound - s_val) / (p_val - s_val)
                if axis == 0:
                    out.append((bound, sy + t * (py - sy)))
                else:
                    out.append((sx + t * (px - sx), bound))
            if p_in:
                out.append((px, py))
            sx, sy, s_val, s_in = px, py, p_val, p_in
        pts = out
    if len(pts) < 3:
        return 0.0
    area = 0.0
    x0, y0 = pts[-1]
    for x1, y1 in pts:
        area += x0 * y1 - x1 * y0
        x0, y0 = x1, y1
    return abs(area) / 2.0


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, lo: float, hi: float, tol: float) -> float:
    """Golden-section maximizer of a unimodal function on [lo, hi]."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def _rotiou_pivot_local(
    box: AABox, theta: float, max_iter: int = 200, tol: float = 1e-6
) -> AABox:
    """Coordinate descent with golden-section line searches.

    Optimizes IoU between an axis-aligned candidate and the oriented
    rectangle obtained by rotating ``box`` about its center, starting
    from the ellipse label (near-optimal in practice).
    """
    c = box.center
    oriented = rotate_polygon(box_polygon(box), Rotation(theta, c))
    o_area = oriented.area
    o_bb = bbox_of(oriented)
    o_pts = [tuple(p) for p in oriented.vertices]
    gap = 1e-6 * max(box.width, box.height)

    def iou_of(coords: list[float]) -> float:
        x1, y1, x2, y2 = coords
        ia = _clip_area_to_box(o_pts, x1, y1, x2, y2)
        return ia / ((x2 - x1) * (y2 - y1) + o_area - ia)

    hx, hy = _half_extents_ellipse(box.width / 2.0, box.height / 2.0, theta)
    cur = [c.x - hx, c.y - hy, c.x + hx, c.y + hy]
    best = iou_of(cur)
    # (index, lower-bound fn, upper-bound fn) per coordinate
    bounds = (
        (0, lambda q: o_bb.xmin, lambda q: q[2] - gap),
        (1, lambda q: o_bb.ymin, lambda q: q[3] - gap),
        (2, lambda q: q[0] + gap, lambda q: o_bb.xmax),
        (3, lambda q: q[1] + gap, lambda q: o_bb.ymax),
    )
    for _ in range(max_iter):
        move = 0.0
        for idx, lo_fn, hi_fn in bounds:
            lo, hi = lo_fn(cur), hi_fn(cur)
            if hi - lo <= tol:
                continue

            def slice_obj(x, idx=idx):
                trial = list(cur)
                trial[idx] = x
                return iou_of(trial)

            x_star = _golden_max(slice_obj, lo, hi, tol * 0.5)
            f_star = slice_obj(x_star)
            if f_star >= best:
                move = max(move, abs(x_star - cur[idx]))
                cur[idx] = x_star
                best = f_star
        if move < tol:
            return AABox(*cur)
    raise RotIoUDidNotConverge(AABox(*cur), best)


def rotiou_label(
    box: AABox,
    theta: float,
    frame: FrameSpec | None = None,
    *,
    max_iter: int = 200,
    tol: float = 1e-6,
) -> AABox:
    """Axis-aligned label maximizing IoU with the rotated (oriented) box."""
    theta_c = Rotation(theta).theta
    if theta_c == 0.0:
        label = box
    else:
        label = _rotiou_pivot_local(box, theta, max_iter=max_iter, tol=tol)
    if frame is None:
        return label
    t = frame_transform(frame, theta)
    c = box.center
    c_new = t.apply_point(c)
    return label.translated(c_new.x - c.x, c_new.y - c.y)


def clip_box_to_frame(
    box: AABox, frame: FrameSpec, min_visibility: float = 0.25
) -> tuple[AABox | None, float]:
    """Clip a label to the canvas; drop it when too little remains.

    Returns ``(clipped_box_or_None, visible_fraction)`` where the
    fraction is clipped area over original area.
    """
    inter = box.intersection(frame.box())
    if inter is None:
        return None, 0.0
    fraction = inter.area / box.area
    if fraction < min_visibility:
        return None, fraction
    return inter, fraction
