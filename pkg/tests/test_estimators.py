import math

import numpy as np
import pytest
from sklearn.base import clone

from rotaug.estimators import (
    BoxRotationAugmenter,
    CanonicalShapeEstimator,
    RotationCertaintyGate,
)
from rotaug.geometry import AABox, bbox_of
from rotaug.rotators import rotate_label
from rotaug.ruloss import RuParams, certainty, regression_loss_active
from rotaug.sampling import ShapeDistConfig


class TestAugmenter:
    def test_matches_functional_core(self):
        rng = np.random.default_rng(0)
        X = np.column_stack(
            [
                rng.uniform(0, 50, 20),
                rng.uniform(0, 50, 20),
                rng.uniform(60, 100, 20),
                rng.uniform(60, 100, 20),
            ]
        )
        aug = BoxRotationAugmenter(method="ellipse", theta_deg=25.0)
        out = aug.fit_transform(X)
        theta = math.radians(25.0)
        for row, got in zip(X, out):
            want = rotate_label("ellipse", AABox(*row), theta)
            np.testing.assert_allclose(got, want.as_tuple(), atol=0)

    def test_random_method_row_keyed(self):
        X = np.array([[0, 0, 10, 10], [0, 0, 10, 10]])
        aug = BoxRotationAugmenter(method="random", theta_deg=20.0, seed=3)
        out1 = aug.transform(X)
        out2 = aug.transform(X)
        np.testing.assert_array_equal(out1, out2)
        assert not np.array_equal(out1[0], out1[1])  # distinct draws per row

    def test_rejects_perfect(self):
        with pytest.raises(ValueError, match="method must be one of"):
            BoxRotationAugmenter(method="perfect").fit(np.zeros((0, 4)))

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError, match=r"\(n, 4\)"):
            BoxRotationAugmenter().transform(np.zeros((3, 5)))

    def test_rejects_degenerate_rows(self):
        with pytest.raises(ValueError, match="degenerate"):
            BoxRotationAugmenter().transform(np.array([[0, 0, 0, 1]]))

    def test_sklearn_params_round_trip(self):
        aug = BoxRotationAugmenter(method="octagon", octagon_s=0.4, theta_deg=7.5)
        params = aug.get_params()
        assert params["octagon_s"] == 0.4
        cloned = clone(aug)
        assert cloned.get_params() == params


class TestCanonicalShapeEstimator:
    def test_fit_produces_valid_shape(self):
        est = CanonicalShapeEstimator(
            m=32,
            max_iter=60,
            k=150,
            theta_grid_deg=tuple(range(5, 46, 5)),
            seed=0,
        )
        est.fit(np.array([0.0, 0.0, 50.0, 50.0]))
        assert est.shape_.shape == (32, 2)
        assert est.n_iter_ == est.trace_.iterations
        assert 0 <= est.eiou_ <= 100
        bb = bbox_of(est.trace_.shape)
        np.testing.assert_allclose(bb.as_tuple(), (0, 0, 50, 50), atol=1e-9)

    def test_accepts_aabox(self):
        est = CanonicalShapeEstimator(
            m=16, max_iter=20, k=60, theta_grid_deg=(10, 25, 40), seed=1
        )
        est.fit(AABox(0, 0, 10, 20).as_tuple())
        assert hasattr(est, "eiou_")


class TestCertaintyGate:
    def test_predict_matches_core(self):
        gate = RotationCertaintyGate(delta_deg=10.0)
        params = RuParams(delta=math.radians(10.0))
        rng = np.random.default_rng(5)
        X = np.column_stack(
            [rng.uniform(0, 1, 100), rng.uniform(-math.pi, math.pi, 100)]
        )
        got = gate.fit(X).predict(X)
        want = [regression_loss_active(i, t, params) for i, t in X]
        assert got.tolist() == want

    def test_thresholds(self):
        gate = RotationCertaintyGate(delta_deg=15.0)
        params = RuParams(delta=math.radians(15.0))
        thetas = [0.0, math.radians(15), math.radians(45)]
        np.testing.assert_allclose(
            gate.thresholds(thetas),
            [certainty(t, params) for t in thetas],
            atol=0,
        )

    def test_invalid_rows_rejected(self):
        with pytest.raises(ValueError, match="IoU"):
            RotationCertaintyGate().predict(np.array([[1.5, 0.0]]))
