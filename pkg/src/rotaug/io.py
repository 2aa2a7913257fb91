"""Annotation and raster I/O.

Reads and writes a COCO-style JSON subset (images, annotations with
xywh boxes and polygon segmentations, categories), emits CSV with fixed
schemas, and rotates binary PPM (P6) rasters with inverse-map bilinear
resampling. RLE segmentation masks are rejected; only polygon
segmentations are supported.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import AABox, Polygon
from .rotators import FrameSpec, frame_transform

__all__ = [
    "AnnImage",
    "Annotation",
    "Category",
    "AnnotationSet",
    "RasterImage",
    "load_annotations",
    "save_annotations",
    "emit_csv",
    "read_ppm",
    "write_ppm",
    "rotate_raster",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnnImage:
    id: int
    width: int
    height: int
    file_name: str


@dataclass(frozen=True)
class Category:
    id: int
    name: str


@dataclass(frozen=True)
class Annotation:
    id: int
    image_id: int
    box: AABox  # corner form internally; serialized as xywh
    category_id: int
    shape: Polygon | None = None


@dataclass
class AnnotationSet:
    images: list[AnnImage] = field(default_factory=list)
    annotations: list[Annotation] = field(default_factory=list)
    categories: list[Category] = field(default_factory=list)

    def __post_init__(self) -> None:
        image_ids = {im.id for im in self.images}
        if len(image_ids) != len(self.images):
            raise ValueError("duplicate image ids")
        for i, ann in enumerate(self.annotations):
            if ann.image_id not in image_ids:
                raise ValueError(
                    f"annotation[{i}] (id {ann.id}): unknown image_id {ann.image_id}"
                )

    def image_by_id(self, image_id: int) -> AnnImage:
        for im in self.images:
            if im.id == image_id:
                return im
        raise KeyError(image_id)

    def annotations_of(self, image_id: int) -> list[Annotation]:
        return [a for a in self.annotations if a.image_id == image_id]


def _parse_segmentation(seg, index: int) -> tuple[Polygon, AABox | None] | None:
    """Returns (shape, union_box) where union_box is set for multi-part
    segmentations (bounding box over all parts)."""
    if seg is None:
        return None
    if isinstance(seg, dict):
        raise ValueError(
            f"annotation[{index}]: RLE segmentation masks are not supported; "
            "provide polygon segmentations"
        )
    if not isinstance(seg, list) or not seg:
        raise ValueError(f"annotation[{index}]: malformed segmentation")
    polys = []
    for part in seg:
        if not isinstance(part, list) or len(part) < 6 or len(part) % 2 != 0:
            raise ValueError(
                f"annotation[{index}]: segmentation polygons need >= 3 points "
                "as a flat even-length coordinate list"
            )
        polys.append(Polygon(np.asarray(part, dtype=np.float64).reshape(-1, 2)))
    if len(polys) == 1:
        return polys[0], None
    # multi-part segmentation: keep the largest part as the shape, but
    # the box covers the union of parts
    largest = max(polys, key=lambda p: p.area)
    stacked = np.concatenate([p.vertices for p in polys])
    union_box = AABox(
        float(stacked[:, 0].min()),
        float(stacked[:, 1].min()),
        float(stacked[:, 0].max()),
        float(stacked[:, 1].max()),
    )
    logger.info(
        "annotation[%d]: %d segmentation parts; keeping the largest by area",
        index,
        len(polys),
    )
    return largest, union_box


def load_annotations(path) -> AnnotationSet:
    """Parse the documented COCO-style JSON subset.

    Boxes are converted to corner form. Multi-polygon segmentations are
    collapsed to the largest-area part (logged); the stored box is the
    union bounding box as given in the file. Malformed records raise
    with their index.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: malformed JSON: {exc}") from exc
    for key in ("images", "annotations", "categories"):
        if key not in raw:
            raise ValueError(f"{path}: missing required top-level key {key!r}")

    images = []
    for i, im in enumerate(raw["images"]):
        try:
            images.append(
                AnnImage(
                    id=int(im["id"]),
                    width=int(im["width"]),
                    height=int(im["height"]),
                    file_name=str(im["file_name"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"images[{i}]: {exc}") from exc
        if images[-1].width <= 0 or images[-1].height <= 0:
            raise ValueError(f"images[{i}]: non-positive dimensions")

    annotations = []
    for i, ann in enumerate(raw["annotations"]):
        try:
            x, y, w, h = (float(v) for v in ann["bbox"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"annotation[{i}]: bad bbox: {exc}") from exc
        if w <= 0 or h <= 0:
            raise ValueError(
                f"annotation[{i}] (id {ann.get('id')}): degenerate bbox "
                f"w={w}, h={h}"
            )
        try:
            parsed = _parse_segmentation(ann.get("segmentation"), i)
        except ValueError:
            raise
        except Exception as exc:
            raise ValueError(f"annotation[{i}]: bad segmentation: {exc}") from exc
        box = AABox.from_xywh(x, y, w, h)
        shape = None
        if parsed is not None:
            shape, union_box = parsed
            if union_box is not None:
                box = union_box
        annotations.append(
            Annotation(
                id=int(ann["id"]),
                image_id=int(ann["image_id"]),
                box=box,
                category_id=int(ann.get("category_id", 0)),
                shape=shape,
            )
        )

    categories = [
        Category(id=int(c["id"]), name=str(c.get("name", "")))
        for c in raw["categories"]
    ]
    return AnnotationSet(images=images, annotations=annotations, categories=categories)


def _round6(x: float) -> float:
    return round(float(x), 6)


def save_annotations(aset: AnnotationSet, path) -> None:
    """Serialize with a fixed field order and 6-decimal floats."""
    out = {
        "images": [
            {
                "id": im.id,
                "width": im.width,
                "height": im.height,
                "file_name": im.file_name,
            }
            for im in aset.images
        ],
        "annotations": [],
        "categories": [{"id": c.id, "name": c.name} for c in aset.categories],
    }
    for ann in aset.annotations:
        x, y, w, h = ann.box.as_xywh()
        entry = {
            "id": ann.id,
            "image_id": ann.image_id,
            "bbox": [_round6(x), _round6(y), _round6(w), _round6(h)],
            "category_id": ann.category_id,
        }
        if ann.shape is not None:
            entry["segmentation"] = [
                [_round6(v) for v in ann.shape.vertices.ravel()]
            ]
        out["annotations"].append(entry)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")


def emit_csv(rows, schema, path) -> None:
    """Write rows under an exact header; floats with 6 decimals."""

    def fmt(v) -> str:
        if isinstance(v, bool):
            return str(v)
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.6f}"
        return str(v)

    def write(fh):
        fh.write(",".join(schema) + "\n")
        for row in rows:
            if len(row) != len(schema):
                raise ValueError(
                    f"row width {len(row)} does not match schema width {len(schema)}"
                )
            fh.write(",".join(fmt(v) for v in row) + "\n")

    if hasattr(path, "write"):
        write(path)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            write(fh)


@dataclass
class RasterImage:
    """8-bit RGB raster; rows are packed 3*width bytes."""

    width: int
    height: int
    data: bytes

    def __post_init__(self) -> None:
        if len(self.data) != 3 * self.width * self.height:
            raise ValueError(
                f"pixel buffer holds {len(self.data)} bytes, expected "
                f"{3 * self.width * self.height}"
            )

    def to_array(self) -> np.ndarray:
        return np.frombuffer(self.data, dtype=np.uint8).reshape(
            self.height, self.width, 3
        )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RasterImage":
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) array, got {arr.shape}")
        return cls(width=arr.shape[1], height=arr.shape[0], data=arr.tobytes())


def read_ppm(path) -> RasterImage:
    """Read a binary (P6) PPM with maxval 255."""
    with open(path, "rb") as fh:
        content = fh.read()
    if not content.startswith(b"P6"):
        raise ValueError(f"{path}: not a binary PPM (P6) file")
    # header: magic, width, height, maxval, then a single whitespace byte
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(content) and content[pos : pos + 1].isspace():
            pos += 1
        if content[pos : pos + 1] == b"#":
            while pos < len(content) and content[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(content) and not content[pos : pos + 1].isspace():
            pos += 1
        fields.append(content[start:pos])
    pos += 1  # single whitespace after maxval
    width, height, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported, got {maxval}")
    data = content[pos : pos + 3 * width * height]
    if len(data) != 3 * width * height:
        raise ValueError(f"{path}: truncated pixel data")
    return RasterImage(width=width, height=height, data=data)


def write_ppm(img: RasterImage, path) -> None:
    with open(path, "wb") as fh:
        fh.write(f"P6\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(img.data)


def rotate_raster(
    img: RasterImage,
    theta: float,
    frame: FrameSpec | None = None,
    fill: tuple[int, int, int] = (0, 0, 0),
) -> RasterImage:
    """Rotate with inverse-map bilinear resampling.

    Output dimensions come from the frame transform (the image's own
    frame when none is given); sample points outside the source get the
    fill color. Right-angle rotations are lossless.
    """
    if frame is None:
        frame = FrameSpec(img.width, img.height)
    if theta == 0.0 and frame.mode != "expand":
        return RasterImage(img.width, img.height, img.data)
    t = frame_transform(frame, theta)
    w_out = int(round(t.frame_out.width))
    h_out = int(round(t.frame_out.height))
    if theta == 0.0 and (w_out, h_out) == (img.width, img.height):
        return RasterImage(img.width, img.height, img.data)

    src = img.to_array().astype(np.float64)
    # inverse map: p_src = R^-1 (p_out - translation - pivot) + pivot
    piv = t.rotation.pivot
    c, s = math.cos(t.rotation.theta), math.sin(t.rotation.theta)
    xs = np.arange(w_out) + 0.5
    ys = np.arange(h_out) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    dx = gx - t.translation[0] - piv.x
    dy = gy - t.translation[1] - piv.y
    sx = c * dx + s * dy + piv.x
    sy = -s * dx + c * dy + piv.y

    outside = (sx < 0) | (sx > img.width) | (sy < 0) | (sy > img.height)
    fx = sx - 0.5
    fy = sy - 0.5
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    wx = fx - x0
    wy = fy - y0
    x0c = np.clip(x0, 0, img.width - 1)
    x1c = np.clip(x0 + 1, 0, img.width - 1)
    y0c = np.clip(y0, 0, img.height - 1)
    y1c = np.clip(y0 + 1, 0, img.height - 1)

    wx = wx[..., None]
    wy = wy[..., None]
    out = (
        src[y0c, x0c] * (1 - wx) * (1 - wy)
        + src[y0c, x1c] * wx * (1 - wy)
        + src[y1c, x0c] * (1 - wx) * wy
        + src[y1c, x1c] * wx * wy
    )
    out = np.rint(out).astype(np.uint8)
    out[outside] = np.asarray(fill, dtype=np.uint8)
    return RasterImage.from_array(out)
