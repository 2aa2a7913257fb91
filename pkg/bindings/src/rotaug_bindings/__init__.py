"""Hot-path bindings for augmentation pipelines.

Four functions, marshaling plain tuples and arrays at the boundary and
delegating to the rotaug core, so results are bit-identical to it:

- :func:`rotate_box` - rotated-scene label for one xyxy box.
- :func:`rotate_boxes_batch` - the same over an (n, 4) array, one
  boundary crossing per batch.
- :func:`certainty` - rotation-certainty threshold C(theta).
- :func:`loss_active` - the regression-loss gate.

Boxes and scalars only; polygons are not marshaled, so the shape-based
"perfect" method is rejected at this boundary. Version is pinned to the
core package.
"""

from __future__ import annotations

import math

import numpy as np

from rotaug import (
    AABox,
    FrameSpec,
    RuParams,
    ShapeDistConfig,
    rotate_label,
)
from rotaug import certainty as _core_certainty
from rotaug import regression_loss_active as _core_loss_active

__version__ = "0.1.0"

__all__ = ["rotate_box", "rotate_boxes_batch", "certainty", "loss_active"]

_ALLOWED = ("largest", "ellipse", "octagon", "octagon:<scale>", "random", "rotiou")


def _parse_method(method: str) -> tuple[str, float]:
    if not isinstance(method, str):
        raise TypeError(f"method must be a string, got {type(method).__name__}")
    name, _, suffix = method.partition(":")
    octagon_s = 0.25
    if name == "perfect":
        raise ValueError(
            "the 'perfect' method needs the object shape, which this "
            "boundary does not marshal; use the core API"
        )
    if suffix:
        if name != "octagon":
            raise ValueError(
                f"only the octagon method takes a scale suffix, got {method!r}"
            )
        octagon_s = float(suffix)
    if name not in ("largest", "ellipse", "octagon", "random", "rotiou"):
        raise ValueError(
            f"unknown method {method!r}; allowed: {', '.join(_ALLOWED)}"
        )
    return name, octagon_s


def _check_box(box) -> AABox:
    values = tuple(float(v) for v in box)
    if len(values) != 4:
        raise ValueError(f"box must have 4 coordinates, got {len(values)}")
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"box coordinates must be finite, got {values}")
    return AABox(*values)


def _check_frame(frame) -> FrameSpec | None:
    if frame is None:
        return None
    w, h, mode = frame
    return FrameSpec(float(w), float(h), mode=str(mode))


def rotate_box(
    method: str,
    box,
    theta_rad: float,
    frame=None,
    *,
    seed: int = 0,
    draw_index: int = 0,
):
    """Rotated-scene label for one box; bit-identical to the core.

    ``box`` is an (xmin, ymin, xmax, ymax) tuple, ``frame`` an optional
    ``(width, height, mode)`` tuple (None keeps the box center fixed).
    The octagon scale rides in the method string, e.g. ``octagon:0.2``;
    ``seed``/``draw_index`` feed the random method.
    """
    name, octagon_s = _parse_method(method)
    label = rotate_label(
        name,
        _check_box(box),
        float(theta_rad),
        _check_frame(frame),
        octagon_s=octagon_s,
        shape_cfg=ShapeDistConfig(seed=seed),
        draw_index=draw_index,
    )
    return label.as_tuple()


def rotate_boxes_batch(
    method: str,
    boxes,
    theta_rad: float,
    frame=None,
    *,
    seed: int = 0,
):
    """Vectorized loop over :func:`rotate_box`; one crossing per batch.

    ``boxes`` is an (n, 4) array; row index doubles as the draw index
    for the random method. Returns an (n, 4) float64 array whose rows
    are bit-identical to scalar calls.
    """
    arr = np.asarray(boxes, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"boxes must have shape (n, 4), got {arr.shape}")
    out = np.empty_like(arr)
    for i, row in enumerate(arr):
        out[i] = rotate_box(
            method, row, theta_rad, frame, seed=seed, draw_index=i
        )
    return out


def certainty(theta_rad: float, delta_rad: float) -> float:
    """Rotation-certainty threshold; see the core for the curve."""
    return _core_certainty(float(theta_rad), RuParams(delta=float(delta_rad)))


def loss_active(iou: float, theta_rad: float, delta_rad: float) -> bool:
    """True while the prediction is not yet close enough to the label."""
    return _core_loss_active(
        float(iou), float(theta_rad), RuParams(delta=float(delta_rad))
    )
