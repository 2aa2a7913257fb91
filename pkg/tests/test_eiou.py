import math

import numpy as np
import pytest

from rotaug.eiou import (
    EiouConfig,
    EiouEstimator,
    OptimizerConfig,
    estimate_eiou_for_method,
    estimate_eiou_for_shape,
    optimize_canonical_shape,
)
from rotaug.geometry import AABox, Polygon, bbox_of, box_polygon, inscribed_ellipse
from rotaug.sampling import ShapeDistConfig

UNIT = AABox(0, 0, 1, 1)
SQUARE = AABox(0, 0, 100, 100)

# grid/sample sizes trimmed for unit-test speed; the acceptance suite
# runs the full defaults
FAST = EiouConfig(
    thetas=tuple(math.radians(d) for d in range(3, 46, 3)),
    k=200,
    seed=0,
)


@pytest.fixture(scope="module")
def fast_estimator():
    return EiouEstimator(SQUARE, FAST)


class TestConfig:
    def test_k_positive(self):
        with pytest.raises(ValueError):
            EiouConfig(k=0)

    def test_grid_nonempty(self):
        with pytest.raises(ValueError):
            EiouConfig(thetas=())

    def test_grid_range(self):
        with pytest.raises(ValueError):
            EiouConfig(thetas=(math.radians(90),))
        EiouConfig(thetas=(0.0,))  # degenerate zero is allowed


class TestEstimates:
    def test_degenerate_zero_grid_scores_100(self, fast_estimator):
        cfg = EiouConfig(thetas=(0.0,), k=50, seed=1)
        est = EiouEstimator(SQUARE, cfg)
        for shape in (box_polygon(SQUARE), inscribed_ellipse(SQUARE, 64)):
            overall, per_theta = est.eiou_of_shape(shape)
            assert overall == pytest.approx(100.0, abs=1e-9)
            assert per_theta.shape == (1,)

    def test_invalid_shape_rejected(self, fast_estimator):
        small = Polygon([(10, 10), (60, 10), (30, 80)])
        with pytest.raises(ValueError, match="not valid"):
            fast_estimator.eiou_of_shape(small)

    def test_ellipse_beats_largest(self, fast_estimator):
        el, _ = fast_estimator.eiou_of_shape(inscribed_ellipse(SQUARE, 4096))
        lg, _ = fast_estimator.eiou_of_shape(box_polygon(SQUARE))
        assert el - lg >= 8.0

    def test_method_equals_shape_for_ellipse(self, fast_estimator):
        by_shape, _ = fast_estimator.eiou_of_shape(inscribed_ellipse(SQUARE, 4096))
        by_method, _ = fast_estimator.eiou_of_method("ellipse")
        assert by_method == pytest.approx(by_shape, abs=1e-5)

    def test_method_equals_shape_for_largest(self, fast_estimator):
        by_shape, _ = fast_estimator.eiou_of_shape(box_polygon(SQUARE))
        by_method, _ = fast_estimator.eiou_of_method("largest")
        assert by_method == pytest.approx(by_shape, abs=1e-9)

    def test_octagon_half_between_largest_and_ellipse(self, fast_estimator):
        lg, _ = fast_estimator.eiou_of_method("largest")
        el, _ = fast_estimator.eiou_of_method("ellipse")
        oc, _ = fast_estimator.eiou_of_method("octagon", octagon_s=0.5)
        assert lg < oc < el

    def test_perfect_method_rejected(self, fast_estimator):
        with pytest.raises(ValueError, match="perfect"):
            fast_estimator.eiou_of_method("perfect")

    def test_module_level_helpers_share_bank(self, fast_estimator):
        a, _ = estimate_eiou_for_shape(
            box_polygon(SQUARE), SQUARE, FAST, estimator=fast_estimator
        )
        b, _ = estimate_eiou_for_method(
            "largest", SQUARE, FAST, estimator=fast_estimator
        )
        assert a == pytest.approx(b, abs=1e-9)

    def test_determinism(self):
        cfg = EiouConfig(thetas=FAST.thetas, k=100, seed=5)
        a = EiouEstimator(SQUARE, cfg)
        b = EiouEstimator(SQUARE, cfg)
        assert np.array_equal(a.bank, b.bank)
        sa, _ = a.eiou_of_shape(inscribed_ellipse(SQUARE, 64))
        sb, _ = b.eiou_of_shape(inscribed_ellipse(SQUARE, 64))
        assert sa == sb

    def test_doubling_k_moves_estimate_less_than_one_point(self):
        thetas = tuple(math.radians(d) for d in range(5, 46, 5))
        moved = []
        for seed in range(6):
            e1 = EiouEstimator(UNIT, EiouConfig(thetas=thetas, k=400, seed=seed))
            e2 = EiouEstimator(UNIT, EiouConfig(thetas=thetas, k=800, seed=seed))
            v1, _ = e1.eiou_of_shape(inscribed_ellipse(UNIT, 512))
            v2, _ = e2.eiou_of_shape(inscribed_ellipse(UNIT, 512))
            moved.append(abs(v1 - v2))
        assert sorted(moved)[-1] < 1.0


@pytest.fixture(scope="module")
def result():
    cfg = EiouConfig(
        thetas=tuple(math.radians(d) for d in range(2, 46, 2)),
        k=400,
        seed=0,
    )
    est = EiouEstimator(SQUARE, cfg)
    ocfg = OptimizerConfig(m=64, max_iter=300)
    trace = optimize_canonical_shape(SQUARE, ocfg, cfg, estimator=est)
    return est, trace


class TestOptimizer:

    def test_start_matches_largest(self, result):
        est, trace = result
        lg, _ = est.eiou_of_shape(box_polygon(SQUARE))
        assert abs(trace.objectives[0] - lg) < 0.5

    def test_monotone_within_slack(self, result):
        _, trace = result
        diffs = np.diff(trace.objectives)
        assert diffs.min() >= -1e-4

    def test_final_matches_ellipse(self, result):
        est, trace = result
        el, _ = est.eiou_of_shape(inscribed_ellipse(SQUARE, 4096))
        assert abs(trace.eiou - el) <= 1.0

    def test_projection_keeps_bbox(self, result):
        _, trace = result
        bb = bbox_of(trace.shape)
        for got, want in zip(bb.as_tuple(), SQUARE.as_tuple()):
            assert abs(got - want) <= 1e-9

    def test_shape_is_near_circular(self, result):
        _, trace = result
        c = SQUARE.center
        v = (trace.shape.vertices - [c.x, c.y]) / [50.0, 50.0]
        r = np.hypot(v[:, 0], v[:, 1])
        assert np.abs(r - 1).mean() < 0.05

    def test_trace_rows_cover_every_iteration(self, result):
        _, trace = result
        assert len(trace.objectives) == trace.iterations + 1
        assert len(trace.taus) == len(trace.objectives)
        rows = trace.trace_rows()
        assert rows[0][0] == 0 and rows[-1][0] == trace.iterations

    def test_tau_annealed(self, result):
        _, trace = result
        assert trace.taus[0] == pytest.approx(0.01)
        assert trace.taus[-1] <= trace.taus[0] / 2

    def test_deterministic(self):
        cfg = EiouConfig(
            thetas=tuple(math.radians(d) for d in range(5, 46, 5)), k=150, seed=3
        )
        ocfg = OptimizerConfig(m=32, max_iter=60)
        t1 = optimize_canonical_shape(UNIT, ocfg, cfg)
        t2 = optimize_canonical_shape(UNIT, ocfg, cfg)
        assert np.array_equal(t1.objectives, t2.objectives)
        assert t1.shape == t2.shape
        assert t1.eiou == t2.eiou
