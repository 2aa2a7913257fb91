"""Rotation-certainty gating for the box regression loss.

Rotated labels are exact at multiples of 90 degrees and least certain
near 45 degrees. The certainty curve maps the rotation angle to an IoU
threshold: while the prediction's IoU against the (noisy) label is below
the threshold the regression loss stays on; once it is at or above the
threshold the prediction is treated as good enough and the loss is
gated off. The curve is clamped below at 0.5, the usual anchor-matching
threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["FLOOR", "RuParams", "certainty", "regression_loss_active", "ru_mask"]

FLOOR = 0.5

_QUARTER = math.pi / 2.0


@dataclass(frozen=True)
class RuParams:
    """``delta`` is the angle (radians) at which certainty reaches 0.5."""

    delta: float = math.radians(10.0)

    def __post_init__(self) -> None:
        if not (0.0 < self.delta <= math.pi / 4.0):
            raise ValueError("delta must be in (0, 45 degrees]")

    @property
    def alpha(self) -> float:
        return 2.0 * math.cos(4.0 * self.delta)


def certainty(theta: float, params: RuParams) -> float:
    """Certainty C(theta) = max(0.5, 1 + (1 - cos 4*theta)/(alpha - 2)).

    90-degree periodic, C(0) = 1, C(delta) = 0.5 exactly, minima at 45
    degrees mod 90. The angle is folded by periodicity before
    evaluation for numerical stability at large magnitudes.
    """
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    t = abs(math.remainder(theta, _QUARTER))
    raw = 1.0 + (1.0 - math.cos(4.0 * t)) / (params.alpha - 2.0)
    return max(FLOOR, raw)


def regression_loss_active(iou_pred_label: float, theta: float, params: RuParams) -> bool:
    """True while the prediction is not yet close enough to the label.

    The loss applies when the prediction/label IoU is below the
    certainty threshold at this angle; at 0 degrees the threshold is 1,
    so the loss is effectively always on.
    """
    if not (0.0 <= iou_pred_label <= 1.0):
        raise ValueError(f"IoU must be in [0, 1], got {iou_pred_label}")
    return iou_pred_label < certainty(theta, params)


def ru_mask(ious, thetas, params: RuParams) -> np.ndarray:
    """Elementwise gate for a batch; boolean array, True where loss applies."""
    iou_arr = np.asarray(ious, dtype=np.float64)
    th_arr = np.asarray(thetas, dtype=np.float64)
    if iou_arr.shape != th_arr.shape:
        raise ValueError(
            f"length mismatch: {iou_arr.shape} ious vs {th_arr.shape} thetas"
        )
    return np.array(
        [regression_loss_active(float(i), float(t), params) for i, t in
         zip(iou_arr.ravel(), th_arr.ravel())],
        dtype=bool,
    ).reshape(iou_arr.shape)
