"""Random valid shapes for a given box.

A "valid" shape for a box is one whose tight bounding box equals that
box. The sampler draws one uniform point on the open interior of each of
the four box sides plus a configurable number of uniform interior
points, and returns the convex hull. The four side points are unique
axis extrema, so they always survive the hull and force the bounding box
to equal the source box exactly.

Draws are counter-indexed: ``sample_valid_shape(box, cfg, i)`` depends
only on ``(cfg.seed, i)``, never on call order or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import AABox, Polygon, bbox_of

__all__ = [
    "ShapeDistConfig",
    "SampleSet",
    "rng_for_draw",
    "sample_valid_shape",
    "sample_shape_set",
]

_U64 = 2**64
_MAX_REDRAWS = 16


@dataclass(frozen=True)
class ShapeDistConfig:
    """Knobs of the random-shape family.

    Draws mix two kinds of members, both touching every box side once:
    convex hulls of one random point per side plus ``interior_points``
    random interior points, and (with probability ``smooth_frac``)
    smooth oval members: phase-sheared inscribed ellipses snapped back
    to the box. ``interior_points`` controls how plump the hull members
    are: 0 yields quadrilaterals with one vertex per side, larger
    values push the hull toward the full box. The defaults calibrate
    the expected-IoU scale of the family (largest-box shapes score ~61
    on a square box, inscribed ellipses ~73).
    """

    interior_points: int = 1
    smooth_frac: float = 0.5
    seed: int = 0
    epsilon_touch: float = 1e-9

    def __post_init__(self) -> None:
        if self.interior_points < 0:
            raise ValueError("interior_points must be >= 0")
        if not 0.0 <= self.smooth_frac <= 1.0:
            raise ValueError("smooth_frac must be in [0, 1]")
        if self.epsilon_touch <= 0:
            raise ValueError("epsilon_touch must be > 0")


@dataclass
class SampleSet:
    """A batch of sampled shapes, each valid for ``box``."""

    shapes: list[Polygon]
    box: AABox
    epsilon_touch: float = 1e-9

    def __post_init__(self) -> None:
        for i, shape in enumerate(self.shapes):
            bb = bbox_of(shape)
            if (
                abs(bb.xmin - self.box.xmin) > self.epsilon_touch
                or abs(bb.ymin - self.box.ymin) > self.epsilon_touch
                or abs(bb.xmax - self.box.xmax) > self.epsilon_touch
                or abs(bb.ymax - self.box.ymax) > self.epsilon_touch
            ):
                raise ValueError(f"shape {i} is not valid for the source box")


def rng_for_draw(seed: int, draw_index: int, stream: int = 0) -> np.random.Generator:
    """A generator keyed by (seed, stream, draw index).

    Independent draws never share state, so any evaluation order or
    degree of parallelism reproduces the same stream.
    """
    if draw_index < 0:
        raise ValueError("draw_index must be >= 0")
    key = (seed % _U64, stream % _U64, draw_index % _U64)
    return np.random.default_rng(np.random.SeedSequence(key))


def _open_unit(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniforms in the open interval (0, 1); exact zeros are redrawn."""
    u = rng.uniform(size=n)
    for _ in range(_MAX_REDRAWS):
        zero = u == 0.0
        if not zero.any():
            return u
        u[zero] = rng.uniform(size=int(zero.sum()))
    raise RuntimeError("random stream kept returning exact zeros")


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; strictly convex hull, positively oriented."""
    pts = sorted({(float(x), float(y)) for x, y in points})
    if len(pts) < 3:
        raise ValueError("hull needs >= 3 distinct points")

    def chain(seq):
        out: list[tuple[float, float]] = []
        for p in seq:
            while len(out) >= 2:
                ox, oy = out[-2]
                ax, ay = out[-1]
                if (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox) <= 0.0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise ValueError("hull is degenerate (collinear points)")
    return np.asarray(hull, dtype=np.float64)


_OVAL_VERTICES = 32
_OVAL_PHASE_MAX = 1.2  # radians; +-pi/2 degenerates to a diagonal segment


def _sample_oval(box: AABox, rng: np.random.Generator) -> Polygon:
    """A phase-sheared inscribed ellipse, rescaled to touch all sides.

    Vertices follow (a*cos t, b*sin(t + psi)); psi = 0 is the axis-
    aligned inscribed ellipse, larger |psi| shears it toward a diagonal
    sliver. The discretized polygon is affinely snapped back onto the
    box so validity holds to float precision.
    """
    psi = rng.uniform(-_OVAL_PHASE_MAX, _OVAL_PHASE_MAX)
    c = box.center
    t = np.arange(_OVAL_VERTICES) * (2.0 * np.pi / _OVAL_VERTICES)
    x = c.x + (box.width / 2.0) * np.cos(t)
    y = c.y + (box.height / 2.0) * np.sin(t + psi)
    for arr, lo, hi in ((x, box.xmin, box.xmax), (y, box.ymin, box.ymax)):
        mn = arr.min()
        span = arr.max() - mn
        arr -= mn
        arr *= (hi - lo) / span
        arr += lo
    return Polygon(np.column_stack([x, y]), copy=False)


def sample_valid_shape(box: AABox, cfg: ShapeDistConfig, draw_index: int) -> Polygon:
    """Draw one random convex shape whose bounding box is exactly ``box``.

    Deterministic given ``(cfg.seed, draw_index)``. Degenerate draws
    (collinear hulls) are redrawn a bounded number of times before
    raising.
    """
    rng = rng_for_draw(cfg.seed, draw_index)
    if cfg.smooth_frac > 0.0 and rng.uniform() < cfg.smooth_frac:
        return _sample_oval(box, rng)
    w = box.width
    h = box.height
    for _ in range(_MAX_REDRAWS):
        u = _open_unit(rng, 4)
        side_pts = np.array(
            [
                [box.xmin + u[0] * w, box.ymin],
                [box.xmax, box.ymin + u[1] * h],
                [box.xmin + u[2] * w, box.ymax],
                [box.xmin, box.ymin + u[3] * h],
            ]
        )
        if cfg.interior_points > 0:
            v = _open_unit(rng, 2 * cfg.interior_points).reshape(-1, 2)
            interior = np.column_stack(
                [box.xmin + v[:, 0] * w, box.ymin + v[:, 1] * h]
            )
            points = np.concatenate([side_pts, interior])
        else:
            points = side_pts
        try:
            hull = _convex_hull(points)
        except ValueError:
            continue
        # the four side points are unique axis extrema, so the hull's
        # bounding box must reproduce the source box bit for bit
        if (
            hull[:, 0].min() == box.xmin
            and hull[:, 0].max() == box.xmax
            and hull[:, 1].min() == box.ymin
            and hull[:, 1].max() == box.ymax
        ):
            return Polygon(hull, copy=False)
    raise RuntimeError(
        f"could not sample a valid shape for draw {draw_index} "
        f"after {_MAX_REDRAWS} redraws"
    )


def sample_shape_set(
    box: AABox, cfg: ShapeDistConfig, count: int, start_index: int = 0
) -> SampleSet:
    """Sample ``count`` shapes at consecutive draw indices."""
    shapes = [sample_valid_shape(box, cfg, start_index + i) for i in range(count)]
    return SampleSet(shapes=shapes, box=box, epsilon_touch=cfg.epsilon_touch)
