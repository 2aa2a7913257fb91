"""Command-line front end.

Subcommands: ``rotate`` (annotation/image augmentation), ``eiou``
(expected-IoU table), ``optimize`` (canonical-shape search),
``certainty`` (loss-gate curve as CSV), ``eval`` (label-quality
report). Angles are degrees at this boundary and radians inside. Every
subcommand is deterministic given ``--seed``, independent of
``--jobs``.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import io as rio
from .eiou import EiouConfig, EiouEstimator, OptimizerConfig, optimize_canonical_shape
from .evaluation import (
    REPORT_SCHEMA,
    AnnotatedInstance,
    EvalConfig,
    evaluate_labels,
)
from .geometry import AABox, Polygon, bbox_of, box_polygon, clip_polygon_to_convex
from .rotators import METHODS, FrameSpec, clip_box_to_frame, frame_transform, rotate_label
from .ruloss import RuParams, certainty
from .sampling import ShapeDistConfig, rng_for_draw

_THETA_STREAM = 0xA11CE


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _map_ordered(fn, items, jobs: int):
    """Apply fn preserving input order; worker count never changes results."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _parse_box(text: str) -> AABox:
    try:
        w, h = (float(v) for v in text.lower().split("x"))
    except ValueError as exc:
        raise ValueError(f"--box must look like WxH, got {text!r}") from exc
    return AABox(0.0, 0.0, w, h)


def _parse_theta_grid(text: str) -> tuple[float, ...]:
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise ValueError(
            f"--theta-grid must look like start:stop:step in degrees, got {text!r}"
        ) from exc
    if step <= 0:
        raise ValueError("--theta-grid step must be positive")
    grid = np.arange(start, stop + step / 2, step)
    return tuple(math.radians(d) for d in grid)


def _parse_methods(text: str, *, allow_perfect: bool) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    if not methods:
        raise ValueError("--methods must name at least one method")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")
        if m == "perfect" and not allow_perfect:
            raise ValueError("the 'perfect' method is not valid here")
    return methods


def _parse_theta_dist(text: str) -> tuple[float, float]:
    kind, _, params = text.partition(":")
    if kind != "normal":
        raise ValueError(
            f"--theta-dist supports normal:mean,std (degrees), got {text!r}"
        )
    try:
        mean, std = (float(v) for v in params.split(","))
    except ValueError as exc:
        raise ValueError(f"bad --theta-dist parameters {params!r}") from exc
    if std < 0:
        raise ValueError("--theta-dist std must be >= 0")
    return mean, std


@dataclass(frozen=True)
class _RotateSpec:
    """Per-image work order for the rotate subcommand (picklable)."""

    image: rio.AnnImage
    annotations: tuple[rio.Annotation, ...]
    theta: float
    method: str
    octagon_s: float
    mode: str
    min_visibility: float
    seed: int
    images_dir: str | None
    images_out_dir: str | None


def _rotate_one_image(spec: _RotateSpec):
    frame = FrameSpec(spec.image.width, spec.image.height, mode=spec.mode)
    t = frame_transform(frame, spec.theta)
    out_frame = t.frame_out
    w_out = int(round(out_frame.width))
    h_out = int(round(out_frame.height))
    canvas = box_polygon(AABox(0.0, 0.0, float(w_out), float(h_out)))

    out_annotations = []
    dropped = []
    for ann in spec.annotations:
        shape = t.apply_polygon(ann.shape) if ann.shape is not None else None
        if spec.method == "perfect":
            # shape and box transform under the same map, so the label
            # comes straight off the rotated shape (tolerant of the
            # 1e-6 box/shape noise that serialization introduces)
            label = bbox_of(shape)
        else:
            label = rotate_label(
                spec.method,
                ann.box,
                spec.theta,
                frame,
                octagon_s=spec.octagon_s,
                shape_cfg=ShapeDistConfig(seed=spec.seed),
                draw_index=ann.id,
            )
        if spec.mode == "keep":
            clipped, fraction = clip_box_to_frame(
                label, out_frame, spec.min_visibility
            )
            if clipped is None:
                dropped.append((spec.image.id, ann.id, fraction))
                continue
            label = clipped
            if shape is not None:
                shape = clip_polygon_to_convex(shape, canvas)
                if shape is None:
                    dropped.append((spec.image.id, ann.id, fraction))
                    continue
                if spec.method == "perfect":
                    label = bbox_of(shape)
        out_annotations.append(
            replace(ann, box=label, shape=shape)
        )

    image_out = rio.AnnImage(
        id=spec.image.id,
        width=w_out,
        height=h_out,
        file_name=spec.image.file_name,
    )
    raster_bytes = None
    if spec.images_dir is not None:
        img = rio.read_ppm(os.path.join(spec.images_dir, spec.image.file_name))
        if (img.width, img.height) != (spec.image.width, spec.image.height):
            raise ValueError(
                f"image {spec.image.file_name}: raster is "
                f"{img.width}x{img.height} but the annotation says "
                f"{spec.image.width}x{spec.image.height}"
            )
        rotated = rio.rotate_raster(img, spec.theta, frame)
        raster_bytes = (rotated.width, rotated.height, rotated.data)
    return image_out, out_annotations, dropped, raster_bytes


def cmd_rotate(args) -> int:
    aset = rio.load_annotations(args.in_path)
    method = args.method
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if method == "perfect":
        missing = sorted(
            {
                a.image_id
                for a in aset.annotations
                if a.shape is None
            }
        )
        if missing:
            names = ", ".join(
                aset.image_by_id(i).file_name for i in missing
            )
            raise ValueError(
                f"the 'perfect' method needs segmentations; missing in: {names}"
            )
    if (args.images is None) != (args.images_out is None):
        raise ValueError("--images and --images-out must be given together")

    if args.theta is not None:
        thetas = {im.id: math.radians(args.theta) for im in aset.images}
    else:
        mean, std = _parse_theta_dist(args.theta_dist)
        thetas = {}
        for im in aset.images:
            rng = rng_for_draw(args.seed, im.id, stream=_THETA_STREAM)
            thetas[im.id] = math.radians(rng.normal(mean, std))

    specs = [
        _RotateSpec(
            image=im,
            annotations=tuple(aset.annotations_of(im.id)),
            theta=thetas[im.id],
            method=method,
            octagon_s=args.octagon_s,
            mode=args.mode,
            min_visibility=args.min_visibility,
            seed=args.seed,
            images_dir=args.images,
            images_out_dir=args.images_out,
        )
        for im in aset.images
    ]
    results = _map_ordered(_rotate_one_image, specs, args.jobs)

    images = []
    annotations = []
    for (image_out, anns, dropped, raster), spec in zip(results, specs):
        images.append(image_out)
        annotations.extend(anns)
        for image_id, ann_id, fraction in dropped:
            print(
                f"dropped: annotation {ann_id} of image {image_id} "
                f"(visible fraction {fraction:.3f})",
                file=sys.stderr,
            )
        if raster is not None:
            os.makedirs(args.images_out, exist_ok=True)
            w, h, data = raster
            rio.write_ppm(
                rio.RasterImage(w, h, data),
                os.path.join(args.images_out, spec.image.file_name),
            )
    out_set = rio.AnnotationSet(
        images=images, annotations=annotations, categories=aset.categories
    )
    rio.save_annotations(out_set, args.out_path)
    print(
        f"rotated {len(images)} images / {len(annotations)} annotations "
        f"-> {args.out_path}"
    )
    return 0


def cmd_eiou(args) -> int:
    box = _parse_box(args.box)
    methods = _parse_methods(args.methods, allow_perfect=False)
    if args.k < 1:
        raise ValueError("--k must be >= 1")
    if args.k < 50:
        print(
            f"warning: --k {args.k} gives a high-variance estimate",
            file=sys.stderr,
        )
    cfg = EiouConfig(
        thetas=_parse_theta_grid(args.theta_grid), k=args.k, seed=args.seed
    )
    estimator = EiouEstimator(box, cfg)
    rows = []
    per_theta_rows = []
    for method in methods:
        overall, per_theta = estimator.eiou_of_method(
            method, octagon_s=args.octagon_s
        )
        rows.append((method, overall))
        for theta, value in zip(cfg.thetas, per_theta):
            per_theta_rows.append((method, math.degrees(theta), value))
    print(f"{'method':<10} {'eiou':>8}")
    for method, overall in rows:
        print(f"{method:<10} {overall:8.2f}")
    if args.out:
        rio.emit_csv(per_theta_rows, ("method", "theta_deg", "eiou"), args.out)
    return 0


def cmd_optimize(args) -> int:
    box = _parse_box(args.box)
    ocfg = OptimizerConfig(
        m=args.m,
        step_size=args.step,
        tau=args.tau,
        max_iter=args.iters,
        tol=args.tol,
    )
    ecfg = EiouConfig(
        thetas=_parse_theta_grid(args.theta_grid), k=args.k, seed=args.seed
    )
    trace = optimize_canonical_shape(box, ocfg, ecfg)
    c = box.center
    a, b = box.width / 2.0, box.height / 2.0
    norm = (trace.shape.vertices - [c.x, c.y]) / [a, b]
    radial = np.hypot(norm[:, 0], norm[:, 1])
    mean_dev = float(np.abs(radial - 1).mean())
    print(f"start objective: {trace.objectives[0]:.3f}")
    print(f"final objective: {trace.objectives[-1]:.3f}")
    print(f"final expected IoU (hard): {trace.eiou:.3f}")
    print(f"iterations: {trace.iterations}  converged: {trace.converged}")
    print(
        f"ellipse fit: mean radial deviation {mean_dev * 100:.2f}% "
        f"(semi-axes {a:g} x {b:g})"
    )
    if args.out_trace:
        rio.emit_csv(trace.trace_rows(), ("iter", "objective", "tau"), args.out_trace)
    if args.out_shape:
        rio.emit_csv(
            [(float(x), float(y)) for x, y in trace.shape.vertices],
            ("x", "y"),
            args.out_shape,
        )
    return 0


def cmd_certainty(args) -> int:
    params = RuParams(delta=math.radians(args.delta))
    grid = np.arange(0.0, args.max_deg + args.grid / 2, args.grid)
    rows = [(float(d), certainty(math.radians(float(d)), params)) for d in grid]
    if args.out:
        rio.emit_csv(rows, ("theta_deg", "certainty"), args.out)
    else:
        rio.emit_csv(rows, ("theta_deg", "certainty"), sys.stdout)
    return 0


def cmd_eval(args) -> int:
    aset = rio.load_annotations(args.in_path)
    methods = _parse_methods(args.methods, allow_perfect=True)
    thetas = [math.radians(float(v)) for v in args.thetas.split(",")]
    instances = [
        AnnotatedInstance(
            image_id=a.image_id,
            box=a.box,
            shape=a.shape,
            category_id=a.category_id,
            instance_id=a.id,
        )
        for a in aset.annotations
    ]
    cfg = EvalConfig(
        octagon_s=args.octagon_s,
        shape_cfg=ShapeDistConfig(seed=args.seed),
        pool=args.pool,
    )
    report = evaluate_labels(instances, methods, thetas, cfg)
    print(report.format_table())
    if args.out:
        rio.emit_csv(report.csv_rows(), REPORT_SCHEMA, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rotaug",
        description="Rotation augmentation for axis-aligned bounding-box labels.",
    )
    parser.add_argument("--seed", type=int, default=0, help="global random seed")
    parser.add_argument("--jobs", type=int, default=1, help="worker count")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rotate", help="rotate an annotation set (and images)")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", dest="out_path", required=True)
    p.add_argument("--method", default="ellipse", choices=METHODS)
    p.add_argument("--octagon-s", type=float, default=0.25)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--theta", type=float, default=None, help="fixed angle, degrees")
    group.add_argument(
        "--theta-dist",
        default="normal:0,15",
        help="per-image angle distribution, e.g. normal:0,15 (degrees)",
    )
    p.add_argument("--mode", default="expand", choices=("expand", "keep"))
    p.add_argument("--min-visibility", type=float, default=0.25)
    p.add_argument("--images", default=None, help="directory of input PPM images")
    p.add_argument("--images-out", default=None, help="directory for rotated images")
    p.set_defaults(func=cmd_rotate)

    p = sub.add_parser("eiou", help="expected-IoU table for labeling methods")
    p.add_argument("--box", required=True, help="box size as WxH")
    p.add_argument("--methods", default="largest,ellipse")
    p.add_argument("--octagon-s", type=float, default=0.25)
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--theta-grid", default="1:45:1")
    p.add_argument("--out", default=None, help="per-angle CSV path")
    p.set_defaults(func=cmd_eiou)

    p = sub.add_parser("optimize", help="canonical-shape gradient ascent")
    p.add_argument("--box", required=True, help="box size as WxH")
    p.add_argument("--m", type=int, default=64)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--step", type=float, default=1e-2)
    p.add_argument("--tau", type=float, default=0.01)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--theta-grid", default="1:45:1")
    p.add_argument("--out-shape", default=None)
    p.add_argument("--out-trace", default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("certainty", help="rotation-certainty curve as CSV")
    p.add_argument("--delta", type=float, default=10.0, help="degrees")
    p.add_argument("--grid", type=float, default=1.0, help="step in degrees")
    p.add_argument("--max-deg", type=float, default=90.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_certainty)

    p = sub.add_parser("eval", help="label-quality report against perfect labels")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--methods", default="largest,ellipse")
    p.add_argument("--thetas", default="10,20,30,40", help="degrees, comma-separated")
    p.add_argument("--pool", action="store_true")
    p.add_argument("--octagon-s", type=float, default=0.25)
    p.add_argument("--out", default=None, help="CSV path")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
