"""Input validation helpers for array-facing APIs."""

from __future__ import annotations

import numpy as np

from .geometry import AABox

__all__ = ["check_boxes_array", "check_box", "check_iou_theta_array"]


def check_boxes_array(X, name: str = "X") -> np.ndarray:
    """Validate an (n, 4) xyxy box array: finite, xmin<xmax, ymin<ymax."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1 and arr.shape == (4,):
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"{name} must have shape (n, 4), got {arr.shape}")
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite coordinates")
    if arr.size and not ((arr[:, 2] > arr[:, 0]).all() and (arr[:, 3] > arr[:, 1]).all()):
        bad = np.nonzero((arr[:, 2] <= arr[:, 0]) | (arr[:, 3] <= arr[:, 1]))[0]
        raise ValueError(f"{name} rows {bad.tolist()} are degenerate boxes")
    return arr


def check_box(b, name: str = "box") -> AABox:
    """Coerce a length-4 sequence or AABox into an AABox."""
    if isinstance(b, AABox):
        return b
    arr = np.asarray(b, dtype=np.float64).ravel()
    if arr.shape != (4,):
        raise ValueError(f"{name} must be an AABox or a length-4 sequence")
    return AABox(*(float(v) for v in arr))


def check_iou_theta_array(X, name: str = "X") -> np.ndarray:
    """Validate an (n, 2) array of (iou, theta) rows."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{name} must have shape (n, 2), got {arr.shape}")
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    if arr.size and ((arr[:, 0] < 0) | (arr[:, 0] > 1)).any():
        raise ValueError(f"{name} first column must be IoU values in [0, 1]")
    return arr
