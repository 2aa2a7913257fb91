import math

import numpy as np
import pytest

import rotaug_bindings as rb
from rotaug import (
    AABox,
    FrameSpec,
    RuParams,
    ShapeDistConfig,
    certainty as core_certainty,
    regression_loss_active,
    rotate_label,
)

DEG = math.radians


def random_inputs(n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        x, y = rng.uniform(-200, 200, size=2)
        w, h = rng.uniform(0.5, 150, size=2)
        theta = rng.uniform(-math.pi, math.pi)
        yield (x, y, x + w, y + h), theta, rng


class TestExamples:
    def test_ellipse_unit_square_identity(self):
        got = rb.rotate_box("ellipse", (0, 0, 1, 1), 0.0, (64, 64, "keep"))
        assert got == (0.0, 0.0, 1.0, 1.0)

    def test_largest_matches_core_example(self):
        got = rb.rotate_box("largest", (0, 0, 2, 1), DEG(30))
        np.testing.assert_allclose(
            got, (-0.11603, -0.43301, 2.11603, 1.43301), atol=1e-5
        )

    def test_perfect_rejected(self):
        with pytest.raises(ValueError, match="perfect"):
            rb.rotate_box("perfect", (0, 0, 1, 1), 0.2)

    def test_unknown_method_lists_allowed(self):
        with pytest.raises(ValueError, match="allowed: largest, ellipse"):
            rb.rotate_box("bestest", (0, 0, 1, 1), 0.2)

    def test_bad_box(self):
        with pytest.raises(ValueError, match="4 coordinates"):
            rb.rotate_box("ellipse", (0, 0, 1), 0.2)
        with pytest.raises(ValueError, match="degenerate"):
            rb.rotate_box("ellipse", (1, 0, 1, 1), 0.2)

    def test_bad_frame_mode(self):
        with pytest.raises(ValueError, match="mode"):
            rb.rotate_box("ellipse", (0, 0, 1, 1), 0.2, (10, 10, "crop"))

    def test_octagon_scale_suffix(self):
        got = rb.rotate_box("octagon:0.5", (0, 0, 1, 1), DEG(45))
        want = rotate_label("octagon", AABox(0, 0, 1, 1), DEG(45), octagon_s=0.5)
        assert got == want.as_tuple()

    def test_scale_suffix_only_for_octagon(self):
        with pytest.raises(ValueError, match="scale suffix"):
            rb.rotate_box("ellipse:0.5", (0, 0, 1, 1), 0.2)


class TestScalarParity:
    def test_rotate_box_bit_identical(self):
        frames = (None, (256, 256, "expand"), (256, 128, "keep"))
        methods = ("largest", "ellipse", "octagon:0.3", "rotiou")
        count = 0
        for (box, theta, rng) in random_inputs(2500, seed=1):
            method = methods[count % len(methods)]
            frame = frames[count % len(frames)]
            got = rb.rotate_box(method, box, theta, frame)
            name, _, suffix = method.partition(":")
            want = rotate_label(
                name,
                AABox(*box),
                theta,
                None if frame is None else FrameSpec(frame[0], frame[1], mode=frame[2]),
                octagon_s=float(suffix) if suffix else 0.25,
            )
            assert got == want.as_tuple()
            count += 1
        assert count == 2500

    def test_random_method_parity(self):
        for i, (box, theta, rng) in enumerate(random_inputs(200, seed=2)):
            got = rb.rotate_box("random", box, theta, seed=7, draw_index=i)
            want = rotate_label(
                "random",
                AABox(*box),
                theta,
                shape_cfg=ShapeDistConfig(seed=7),
                draw_index=i,
            )
            assert got == want.as_tuple()

    def test_certainty_and_gate_bit_identical(self):
        rng = np.random.default_rng(3)
        for _ in range(10_000):
            theta = rng.uniform(-2 * math.pi, 2 * math.pi)
            delta = rng.uniform(DEG(0.5), DEG(45))
            iou = rng.uniform(0, 1)
            params = RuParams(delta=delta)
            assert rb.certainty(theta, delta) == core_certainty(theta, params)
            assert rb.loss_active(iou, theta, delta) == regression_loss_active(
                iou, theta, params
            )


class TestBatch:
    def test_empty(self):
        out = rb.rotate_boxes_batch("ellipse", np.empty((0, 4)), 0.3)
        assert out.shape == (0, 4)

    def test_single_equals_scalar(self):
        box = (3.0, 4.0, 10.0, 9.0)
        batch = rb.rotate_boxes_batch("largest", np.array([box]), DEG(20))
        scalar = rb.rotate_box("largest", box, DEG(20), draw_index=0)
        assert tuple(batch[0]) == scalar

    def test_large_batch_bit_identical_to_scalar_loop(self):
        rng = np.random.default_rng(4)
        n = 10_000
        boxes = np.column_stack(
            [
                rng.uniform(-100, 100, n),
                rng.uniform(-100, 100, n),
                np.zeros(n),
                np.zeros(n),
            ]
        )
        boxes[:, 2] = boxes[:, 0] + rng.uniform(0.5, 80, n)
        boxes[:, 3] = boxes[:, 1] + rng.uniform(0.5, 80, n)
        theta = DEG(17)
        frame = (512, 512, "expand")
        batch = rb.rotate_boxes_batch("ellipse", boxes, theta, frame)
        for i in range(n):
            scalar = rb.rotate_box("ellipse", boxes[i], theta, frame, draw_index=i)
            assert tuple(batch[i]) == scalar

    def test_random_method_batch_keyed_by_row(self):
        boxes = np.array([[0, 0, 10, 10], [0, 0, 10, 10]], dtype=float)
        out = rb.rotate_boxes_batch("random", boxes, DEG(25), seed=5)
        assert not np.array_equal(out[0], out[1])
        again = rb.rotate_boxes_batch("random", boxes, DEG(25), seed=5)
        np.testing.assert_array_equal(out, again)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match=r"\(n, 4\)"):
            rb.rotate_boxes_batch("ellipse", np.zeros((3, 5)), 0.1)


class TestVersionPin:
    def test_versions_match(self):
        import rotaug

        assert rb.__version__ == rotaug.__version__
