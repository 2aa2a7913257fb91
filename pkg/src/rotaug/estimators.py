"""Scikit-learn compatible wrappers around the functional core.

These let the label math compose with sklearn pipelines and grid
search: the augmenter is transform-shaped over (n, 4) box arrays, the
canonical-shape search is fit-shaped, and the certainty gate is
predict-shaped. All state lives in constructor parameters
(``get_params``/``set_params`` work as usual); fitted results use the
trailing-underscore convention.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_box, check_boxes_array, check_iou_theta_array
from .eiou import EiouConfig, OptimizerConfig, optimize_canonical_shape
from .rotators import METHODS, rotate_label
from .ruloss import RuParams, certainty
from .sampling import ShapeDistConfig

__all__ = [
    "BoxRotationAugmenter",
    "CanonicalShapeEstimator",
    "RotationCertaintyGate",
]


class BoxRotationAugmenter(BaseEstimator, TransformerMixin):
    """Rotate (n, 4) xyxy box arrays into rotated-scene labels.

    Parameters
    ----------
    method : str, default="ellipse"
        One of ``rotaug.METHODS`` except "perfect" (shapes are not part
        of the array interface).
    theta_deg : float, default=15.0
        Rotation angle in degrees.
    octagon_s : float, default=0.25
        Corner-cut fraction for the octagon method.
    interior_points, smooth_frac, seed :
        Shape-family knobs for the random method; row index keys each
        draw, so transforms are deterministic.
    """

    def __init__(
        self,
        method: str = "ellipse",
        theta_deg: float = 15.0,
        octagon_s: float = 0.25,
        interior_points: int = 1,
        smooth_frac: float = 0.5,
        seed: int = 0,
    ):
        self.method = method
        self.theta_deg = theta_deg
        self.octagon_s = octagon_s
        self.interior_points = interior_points
        self.smooth_frac = smooth_frac
        self.seed = seed

    def _check_params(self) -> None:
        if self.method not in METHODS or self.method == "perfect":
            allowed = tuple(m for m in METHODS if m != "perfect")
            raise ValueError(
                f"method must be one of {allowed}, got {self.method!r}"
            )

    def fit(self, X, y=None):
        self._check_params()
        X = check_boxes_array(X)
        self.n_features_in_ = 4
        return self

    def transform(self, X) -> np.ndarray:
        self._check_params()
        X = check_boxes_array(X)
        theta = math.radians(self.theta_deg)
        cfg = ShapeDistConfig(
            interior_points=self.interior_points,
            smooth_frac=self.smooth_frac,
            seed=self.seed,
        )
        out = np.empty_like(X)
        for i, row in enumerate(X):
            label = rotate_label(
                self.method,
                check_box(row),
                theta,
                octagon_s=self.octagon_s,
                shape_cfg=cfg,
                draw_index=i,
            )
            out[i] = label.as_tuple()
        return out


class CanonicalShapeEstimator(BaseEstimator):
    """Fit the valid shape maximizing expected IoU for a box.

    ``fit`` runs the gradient-ascent search; afterwards ``shape_``
    holds the (m, 2) vertex array, ``eiou_`` the hard-scored expected
    IoU (0-100 scale), ``trace_`` the full iterate history, and
    ``n_iter_`` the number of iterations performed.
    """

    def __init__(
        self,
        m: int = 64,
        step_size: float = 1e-2,
        tau: float = 0.01,
        max_iter: int = 500,
        tol: float = 1e-5,
        k: int = 1000,
        theta_grid_deg: tuple = tuple(range(1, 46)),
        interior_points: int = 1,
        smooth_frac: float = 0.5,
        seed: int = 0,
    ):
        self.m = m
        self.step_size = step_size
        self.tau = tau
        self.max_iter = max_iter
        self.tol = tol
        self.k = k
        self.theta_grid_deg = theta_grid_deg
        self.interior_points = interior_points
        self.smooth_frac = smooth_frac
        self.seed = seed

    def fit(self, X, y=None):
        box = check_box(np.asarray(X, dtype=np.float64).ravel())
        ocfg = OptimizerConfig(
            m=self.m,
            step_size=self.step_size,
            tau=self.tau,
            max_iter=self.max_iter,
            tol=self.tol,
        )
        ecfg = EiouConfig(
            thetas=tuple(math.radians(d) for d in self.theta_grid_deg),
            k=self.k,
            shape_cfg=ShapeDistConfig(
                interior_points=self.interior_points,
                smooth_frac=self.smooth_frac,
            ),
            seed=self.seed,
        )
        trace = optimize_canonical_shape(box, ocfg, ecfg)
        self.trace_ = trace
        self.shape_ = trace.shape.vertices
        self.eiou_ = trace.eiou
        self.n_iter_ = trace.iterations
        return self


class RotationCertaintyGate(BaseEstimator):
    """Predict whether the box-regression loss applies.

    ``predict`` takes (n, 2) rows of (iou, theta_rad) and returns True
    where the loss should stay on (prediction not yet close enough for
    the label certainty at that angle).
    """

    def __init__(self, delta_deg: float = 10.0):
        self.delta_deg = delta_deg

    def _params(self) -> RuParams:
        return RuParams(delta=math.radians(self.delta_deg))

    def fit(self, X=None, y=None):
        self._params()
        return self

    def thresholds(self, thetas) -> np.ndarray:
        p = self._params()
        arr = np.asarray(thetas, dtype=np.float64).ravel()
        return np.array([certainty(float(t), p) for t in arr])

    def predict(self, X) -> np.ndarray:
        X = check_iou_theta_array(X)
        p = self._params()
        return np.array(
            [iou < certainty(float(t), p) for iou, t in X], dtype=bool
        )
