"""Acceptance criteria, one test per criterion, at stated tolerances.

Run with ``pytest tests/test_acceptance.py`` — the conftest hook prints
one PASS/FAIL line per criterion.
"""

import io as std_io
import math
import time
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pytest

from rotaug.cli import main as cli_main
from rotaug.eiou import EiouConfig, EiouEstimator, OptimizerConfig, optimize_canonical_shape
from rotaug.evaluation import evaluate_labels, synthetic_instances
from rotaug.geometry import (
    AABox,
    Polygon,
    Rotation,
    bbox_of,
    box_polygon,
    inscribed_ellipse,
    rotate_polygon,
)
from rotaug.rotators import rotate_label
from rotaug.ruloss import FLOOR, RuParams, certainty
from rotaug.sampling import ShapeDistConfig, sample_valid_shape
from rotaug.io import (
    AnnImage,
    Annotation,
    AnnotationSet,
    Category,
    RasterImage,
    save_annotations,
    write_ppm,
)

DEG = math.radians


def test_criterion_1_closed_forms_match_polygon_oracle():
    """Largest/ellipse closed forms vs 4096-gon rotate+bbox, 1e-4/coord."""
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    for _ in range(1000):
        x, y = rng.uniform(-800, 800, size=2)
        w, h = rng.uniform(4.0, 400.0, size=2)
        box = AABox(x, y, x + w, y + h)
        theta = rng.uniform(-math.pi, math.pi)
        rot = Rotation(theta, box.center)

        oracle_largest = bbox_of(rotate_polygon(box_polygon(box), rot))
        got_largest = rotate_label("largest", box, theta)
        for a, b in zip(got_largest.as_tuple(), oracle_largest.as_tuple()):
            assert abs(a - b) < 1e-4

        oracle_ellipse = bbox_of(rotate_polygon(inscribed_ellipse(box, 4096), rot))
        got_ellipse = rotate_label("ellipse", box, theta)
        for a, b in zip(got_ellipse.as_tuple(), oracle_ellipse.as_tuple()):
            assert abs(a - b) < 1e-4
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"runtime {elapsed:.1f}s exceeds 5s"


def test_criterion_2_eiou_anchors():
    """Square box, defaults: largest in [57.8, 63.8], ellipse in
    [69.9, 75.9], ellipse - largest >= 8 on the same seed; < 60 s."""
    start = time.perf_counter()
    box = AABox(0, 0, 100, 100)
    cfg = EiouConfig()  # defaults: 45 angles, K=1000
    estimator = EiouEstimator(box, cfg)
    largest, _ = estimator.eiou_of_shape(box_polygon(box))
    ellipse, _ = estimator.eiou_of_shape(inscribed_ellipse(box, 4096))
    elapsed = time.perf_counter() - start
    assert 57.8 <= largest <= 63.8, f"largest EIoU {largest:.2f}"
    assert 69.9 <= ellipse <= 75.9, f"ellipse EIoU {ellipse:.2f}"
    assert ellipse - largest >= 8.0, f"gap {ellipse - largest:.2f}"
    assert elapsed < 60.0, f"runtime {elapsed:.1f}s exceeds 60s"


def test_criterion_3_gradient_ascent_convergence():
    """1:1 and 2:1 boxes: final hard EIoU within 1.0 of the ellipse's,
    recorded objective non-decreasing within 1e-4, mean radial
    deviation from the inscribed ellipse < 5%; < 10 min total."""
    start = time.perf_counter()
    for dims in ((0, 0, 100, 100), (0, 0, 100, 50)):
        box = AABox(*dims)
        cfg = EiouConfig()
        estimator = EiouEstimator(box, cfg)
        trace = optimize_canonical_shape(
            box, OptimizerConfig(), cfg, estimator=estimator
        )
        ellipse, _ = estimator.eiou_of_shape(inscribed_ellipse(box, 4096))
        assert abs(trace.eiou - ellipse) <= 1.0, (
            f"{dims}: final {trace.eiou:.2f} vs ellipse {ellipse:.2f}"
        )
        diffs = np.diff(trace.objectives)
        assert diffs.min() >= -1e-4, f"{dims}: worst step {diffs.min():.2e}"
        c = box.center
        a, b = box.width / 2.0, box.height / 2.0
        norm = (trace.shape.vertices - [c.x, c.y]) / [a, b]
        radial = np.hypot(norm[:, 0], norm[:, 1])
        mean_dev = np.abs(radial - 1.0).mean()
        assert mean_dev < 0.05, f"{dims}: mean radial deviation {mean_dev:.3f}"
    elapsed = time.perf_counter() - start
    assert elapsed < 600.0, f"runtime {elapsed:.1f}s exceeds 10 min"


def test_criterion_4_certainty_exactness():
    """C(0)=1 and C(delta)=0.5 to 1e-12 for delta in {10,15,30,45} deg;
    floor 0.5 at 45 deg for delta=10; 90-degree periodicity on a 0.1
    degree grid."""
    for delta_deg in (10.0, 15.0, 30.0, 45.0):
        params = RuParams(delta=DEG(delta_deg))
        assert abs(certainty(0.0, params) - 1.0) <= 1e-12
        assert abs(certainty(params.delta, params) - 0.5) <= 1e-12
    params10 = RuParams(delta=DEG(10.0))
    assert certainty(DEG(45.0), params10) == FLOOR
    for t_deg in np.arange(0.0, 90.0, 0.1):
        lhs = certainty(DEG(t_deg), params10)
        rhs = certainty(DEG(t_deg + 90.0), params10)
        assert abs(lhs - rhs) <= 1e-12


def test_criterion_5_label_quality_direction():
    """1000 synthetic convex instances: AP75 and mean IoU of the
    ellipse beat the largest box at every angle in {10,20,30,40}."""
    instances = synthetic_instances(1000, seed=0)
    thetas = [DEG(d) for d in (10, 20, 30, 40)]
    report = evaluate_labels(instances, ["largest", "ellipse"], thetas)
    for theta in thetas:
        ell = report.row("ellipse", theta)
        lgs = report.row("largest", theta)
        assert ell.ap75 > lgs.ap75, (
            f"theta {math.degrees(theta):.0f}: AP75 "
            f"{ell.ap75:.3f} vs {lgs.ap75:.3f}"
        )
        assert ell.mean_iou > lgs.mean_iou, (
            f"theta {math.degrees(theta):.0f}: mean IoU "
            f"{ell.mean_iou:.3f} vs {lgs.mean_iou:.3f}"
        )


def _write_cli_dataset(tmp_path):
    rng = np.random.default_rng(0)
    images, annotations = [], []
    ann_id = 0
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    for image_id in range(3):
        images.append(
            AnnImage(id=image_id, width=96, height=64, file_name=f"im{image_id}.ppm")
        )
        arr = rng.integers(0, 256, size=(64, 96, 3), dtype=np.uint8)
        write_ppm(RasterImage.from_array(arr), img_dir / f"im{image_id}.ppm")
        for _ in range(3):
            x = float(rng.uniform(5, 40))
            y = float(rng.uniform(5, 25))
            w = float(rng.uniform(10, 40))
            h = float(rng.uniform(10, 30))
            box = AABox(x, y, x + w, y + h)
            shape = sample_valid_shape(box, ShapeDistConfig(seed=5), ann_id)
            annotations.append(
                Annotation(
                    id=ann_id, image_id=image_id, box=box, category_id=1, shape=shape
                )
            )
            ann_id += 1
    path = tmp_path / "annotations.json"
    save_annotations(
        AnnotationSet(
            images=images, annotations=annotations, categories=[Category(1, "c")]
        ),
        path,
    )
    return path, img_dir


def _run_cli(argv):
    out = std_io.StringIO()
    err = std_io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = cli_main(argv)
    assert code == 0, f"{argv} failed: {err.getvalue()}"
    return out.getvalue()


def test_criterion_6_cli_determinism(tmp_path, monkeypatch):
    """Every subcommand byte-identical across runs and jobs in {1,4}."""
    data, img_dir = _write_cli_dataset(tmp_path)

    def in_fresh_dir(tag):
        d = tmp_path / tag
        d.mkdir()
        monkeypatch.chdir(d)
        return d

    def rotate_outputs(tag, jobs):
        d = in_fresh_dir(tag)
        stdout = _run_cli(
            [
                "--seed", "11",
                "--jobs", str(jobs),
                "rotate",
                "--in", str(data),
                "--out", "out.json",
                "--method", "random",
                "--images", str(img_dir),
                "--images-out", "rotimgs",
            ]
        )
        images = b"".join(
            p.read_bytes() for p in sorted((d / "rotimgs").iterdir())
        )
        return stdout.encode() + (d / "out.json").read_bytes() + images

    base = rotate_outputs("rot_a", 1)
    assert rotate_outputs("rot_b", 1) == base
    assert rotate_outputs("rot_c", 4) == base

    commands = {
        "eiou": lambda jobs: [
            "--seed", "2", "--jobs", str(jobs),
            "eiou", "--box", "48x32", "--k", "120",
            "--theta-grid", "5:45:10", "--out", "out.csv",
        ],
        "optimize": lambda jobs: [
            "--seed", "2", "--jobs", str(jobs),
            "optimize", "--box", "40x40", "--m", "24", "--iters", "40",
            "--k", "100", "--theta-grid", "10:40:10", "--out-trace", "out.csv",
        ],
        "certainty": lambda jobs: [
            "--seed", "2", "--jobs", str(jobs),
            "certainty", "--delta", "10", "--grid", "2.5", "--out", "out.csv",
        ],
        "eval": lambda jobs: [
            "--seed", "2", "--jobs", str(jobs),
            "eval", "--in", str(data), "--methods", "largest,ellipse,random",
            "--thetas", "10,30", "--pool", "--out", "out.csv",
        ],
    }
    for tag, make_argv in commands.items():
        blobs = []
        for run, jobs in (("r1", 1), ("r2", 1), ("r3", 4)):
            d = in_fresh_dir(f"{tag}_{run}")
            stdout = _run_cli(make_argv(jobs))
            blobs.append(stdout.encode() + (d / "out.csv").read_bytes())
        assert blobs[0] == blobs[1] == blobs[2], f"{tag} not deterministic"


def test_criterion_7_property_suites():
    """Containment ordering, 90-degree periodicity, zero-angle
    identity for all six methods, and validity of 1e5 sampled shapes."""
    boxes = (AABox(0, 0, 1, 1), AABox(3, -2, 10, 1.5))
    thetas = [DEG(d) for d in (5, 15, 30, 45, 60, 85)]
    shape_cfg = ShapeDistConfig(seed=13)

    # containment ordering per angle: ellipse and octagons inside the
    # largest box; octagon cuts nest; the ellipse fits inside mild cuts
    # (s at or below 1 - sqrt(2)/2, where the shapes themselves nest)
    for box in boxes:
        for theta in thetas:
            largest = rotate_label("largest", box, theta)
            ellipse = rotate_label("ellipse", box, theta)
            assert largest.contains_box(ellipse, tol=1e-9)
            previous = largest
            for s in (0.0, 0.25, 0.5):
                oct_s = rotate_label("octagon", box, theta, octagon_s=s)
                assert largest.contains_box(oct_s, tol=1e-9)
                assert previous.contains_box(oct_s, tol=1e-9)
                previous = oct_s
            for s in (0.1, 0.2, 0.25):
                oct_s = rotate_label("octagon", box, theta, octagon_s=s)
                assert oct_s.contains_box(ellipse, tol=1e-9)

    # 90-degree periodicity: theta + 90 equals the axis swap about the pivot
    for box in boxes:
        c = box.center
        shape = sample_valid_shape(box, shape_cfg, 1)

        def swap(bb):
            hx = (bb.xmax - bb.xmin) / 2
            hy = (bb.ymax - bb.ymin) / 2
            bc = bb.center
            dx, dy = bc.x - c.x, bc.y - c.y
            return (c.x - dy - hy, c.y + dx - hx, c.x - dy + hy, c.y + dx + hx)

        for theta in thetas:
            for method, kw, tol in (
                ("largest", {}, 1e-9),
                ("ellipse", {}, 1e-9),
                ("octagon", {"octagon_s": 0.3}, 1e-9),
                ("random", {"shape_cfg": shape_cfg, "draw_index": 4}, 1e-9),
                ("perfect", {"shape": shape}, 1e-9),
                ("rotiou", {}, 1e-4),
            ):
                at = rotate_label(method, box, theta, **kw)
                at90 = rotate_label(method, box, theta + math.pi / 2, **kw)
                np.testing.assert_allclose(
                    at90.as_tuple(), swap(at), atol=tol, err_msg=f"{method}"
                )

    # zero-angle identity for all six methods
    for box in boxes:
        shape = sample_valid_shape(box, shape_cfg, 2)
        for method, kw in (
            ("largest", {}),
            ("ellipse", {}),
            ("octagon", {"octagon_s": 0.2}),
            ("random", {"shape_cfg": shape_cfg, "draw_index": 3}),
            ("rotiou", {}),
            ("perfect", {"shape": shape}),
        ):
            assert rotate_label(method, box, 0.0, **kw) == box, method

    # validity of 1e5 sampled shapes
    box = AABox(2.5, -7.0, 55.0, 21.0)
    cfg = ShapeDistConfig(seed=0)
    for i in range(10**5):
        bb = bbox_of(sample_valid_shape(box, cfg, i))
        assert abs(bb.xmin - box.xmin) <= 1e-9
        assert abs(bb.ymin - box.ymin) <= 1e-9
        assert abs(bb.xmax - box.xmax) <= 1e-9
        assert abs(bb.ymax - box.ymax) <= 1e-9


@pytest.mark.skip(
    reason="out of scope by design: detector training tables (COCO/VOC/"
    "bin-picking under RetinaNet/Faster-RCNN) require GPU training; the "
    "loss gate is accepted via criterion 4 and the gate-monotonicity "
    "properties instead"
)
def test_criterion_8_detector_training_out_of_scope():
    pass


def test_criterion_9_binding_parity():
    """Secondary: bindings bit-identical to the core (runs only when
    the bindings package is installed; primary criteria never need it)."""
    bindings = pytest.importorskip("rotaug_bindings")
    rng = np.random.default_rng(99)
    params_checked = 0
    for _ in range(2000):
        x, y = rng.uniform(-50, 50, size=2)
        w, h = rng.uniform(1, 80, size=2)
        theta = rng.uniform(-math.pi, math.pi)
        box = (x, y, x + w, y + h)
        got = bindings.rotate_box("ellipse", box, theta)
        want = rotate_label("ellipse", AABox(*box), theta).as_tuple()
        assert got == want
        iou = rng.uniform(0, 1)
        delta = rng.uniform(DEG(1), DEG(45))
        assert bindings.certainty(theta, delta) == certainty(
            theta, RuParams(delta=delta)
        )
        assert bindings.loss_active(iou, theta, delta) == (
            iou < certainty(theta, RuParams(delta=delta))
        )
        params_checked += 1
    assert params_checked == 2000
