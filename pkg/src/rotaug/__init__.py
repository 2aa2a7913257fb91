"""Rotation augmentation for axis-aligned bounding-box labels.

Rotating a detection image forces a choice of new box labels. This
package implements the label-rotation methods (largest box, inscribed
ellipse, corner-cut octagon, random valid boxes, rotated-IoU optimal,
and shape-derived perfect labels), a Monte-Carlo expected-IoU scorer
with a gradient-ascent search for the best canonical shape, a
rotation-certainty gate for the regression loss, and a label-quality
evaluation harness, plus COCO-style annotation I/O and a CLI.
"""

from .geometry import (
    EPS,
    AABox,
    Point2,
    Polygon,
    Rotation,
    bbox_of,
    box_polygon,
    clip_polygon_to_convex,
    inscribed_ellipse,
    iou_aabb,
    is_convex,
    polygon_area,
    rotate_polygon,
)
from .sampling import (
    SampleSet,
    ShapeDistConfig,
    rng_for_draw,
    sample_shape_set,
    sample_valid_shape,
)
from .rotators import (
    METHODS,
    FrameSpec,
    FrameTransform,
    RotIoUDidNotConverge,
    clip_box_to_frame,
    frame_transform,
    octagon_shape,
    random_valid_label,
    rotate_label,
    rotiou_label,
)
from .eiou import (
    EiouConfig,
    EiouEstimator,
    EiouTrace,
    OptimizerConfig,
    OptimizerDiverged,
    default_theta_grid,
    estimate_eiou_for_method,
    estimate_eiou_for_shape,
    optimize_canonical_shape,
)
from .ruloss import FLOOR, RuParams, certainty, regression_loss_active, ru_mask
from .evaluation import (
    AnnotatedInstance,
    EvalConfig,
    LabelQualityReport,
    LabelRow,
    eiou_vs_quality_table,
    evaluate_labels,
    synthetic_instances,
)
from .estimators import (
    BoxRotationAugmenter,
    CanonicalShapeEstimator,
    RotationCertaintyGate,
)

__version__ = "0.1.0"

__all__ = [
    "EPS",
    "AABox",
    "Point2",
    "Polygon",
    "Rotation",
    "bbox_of",
    "box_polygon",
    "clip_polygon_to_convex",
    "inscribed_ellipse",
    "iou_aabb",
    "is_convex",
    "polygon_area",
    "rotate_polygon",
    "SampleSet",
    "ShapeDistConfig",
    "rng_for_draw",
    "sample_shape_set",
    "sample_valid_shape",
    "METHODS",
    "FrameSpec",
    "FrameTransform",
    "RotIoUDidNotConverge",
    "clip_box_to_frame",
    "frame_transform",
    "octagon_shape",
    "random_valid_label",
    "rotate_label",
    "rotiou_label",
    "EiouConfig",
    "EiouEstimator",
    "EiouTrace",
    "OptimizerConfig",
    "OptimizerDiverged",
    "default_theta_grid",
    "estimate_eiou_for_method",
    "estimate_eiou_for_shape",
    "optimize_canonical_shape",
    "FLOOR",
    "RuParams",
    "certainty",
    "regression_loss_active",
    "ru_mask",
    "AnnotatedInstance",
    "EvalConfig",
    "LabelQualityReport",
    "LabelRow",
    "eiou_vs_quality_table",
    "evaluate_labels",
    "synthetic_instances",
    "BoxRotationAugmenter",
    "CanonicalShapeEstimator",
    "RotationCertaintyGate",
    "__version__",
]
