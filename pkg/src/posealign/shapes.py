"""Landmark-shape geometry.

Shapes live in a canonical frame: landmark coordinates are translated by the
center of the detection box and divided by its diagonal, so one unit equals
one box diagonal.  All distances and class prototypes are expressed in this
frame, which makes them directly comparable to diagonal-normalized pixel
errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InvalidAnnotationError, SchemaError


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel coordinates, (x, y) at the top-left corner."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.x, self.y, self.w, self.h)
        if not all(np.isfinite(vals)):
            raise InvalidAnnotationError(f"non-finite bbox {vals}")
        if self.w <= 0 or self.h <= 0:
            raise InvalidAnnotationError(f"bbox sides must be positive, got {vals}")

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x + self.w / 2.0, self.y + self.h / 2.0])

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.w, self.h))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=np.float64)


def _freeze(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise SchemaError(f"expected (N, 2) landmark array, got shape {pts.shape}")
    pts = pts.copy()
    pts.flags.writeable = False
    return pts


@dataclass(frozen=True, eq=False)
class Shape:
    """N ordered landmarks in the canonical (unit-diagonal, box-centered) frame."""

    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", _freeze(self.points))
        if not np.all(np.isfinite(self.points)):
            raise InvalidAnnotationError("non-finite shape coordinates")

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def stacked(self) -> np.ndarray:
        """Flat 2N view (x0, y0, x1, y1, ...) used for distance computation."""
        return self.points.reshape(-1)

    def allclose(self, other: "Shape", atol: float = 1e-12) -> bool:
        return self.n_points == other.n_points and np.allclose(
            self.points, other.points, atol=atol, rtol=0.0
        )


@dataclass(frozen=True, eq=False)
class RawAnnotation:
    """Landmarks in image pixels together with the detection box they came with."""

    points: np.ndarray
    bbox: BBox
    image_ref: str = ""

    def __post_init__(self):
        object.__setattr__(self, "points", _freeze(self.points))

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class FlipPermutation:
    """Landmark index permutation pairing left and right counterparts.

    Must be an involution: applying it twice is the identity.
    """

    perm: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64).copy()
        n = perm.shape[0]
        if perm.ndim != 1 or sorted(perm.tolist()) != list(range(n)):
            raise ConfigurationError("flip perm is not a permutation")
        if not np.array_equal(perm[perm], np.arange(n)):
            raise ConfigurationError("flip perm is not an involution")
        perm.flags.writeable = False
        object.__setattr__(self, "perm", perm)

    def __len__(self) -> int:
        return self.perm.shape[0]


def normalize_shape(raw: RawAnnotation) -> Shape:
    """Map pixel landmarks into the canonical frame of their detection box."""
    if not np.all(np.isfinite(raw.points)):
        raise InvalidAnnotationError(f"non-finite landmark in {raw.image_ref!r}")
    return Shape((raw.points - raw.bbox.center) / raw.bbox.diagonal)


def denormalize_shape(shape: Shape, bbox: BBox) -> np.ndarray:
    """Inverse of :func:`normalize_shape`; returns pixel points, not a Shape."""
    return shape.points * bbox.diagonal + bbox.center


def shape_distance(a: Shape, b: Shape) -> float:
    """Euclidean norm of the stacked 2N difference vector."""
    if a.n_points != b.n_points:
        raise SchemaError(f"shape size mismatch: {a.n_points} vs {b.n_points}")
    return float(np.linalg.norm(a.stacked - b.stacked))


def flip_shape(shape: Shape, perm: FlipPermutation) -> Shape:
    """Mirror a canonical shape about x=0 and restore landmark identities."""
    if len(perm) != shape.n_points:
        raise SchemaError(f"perm length {len(perm)} != n_points {shape.n_points}")
    mirrored = shape.points * np.array([-1.0, 1.0])
    return Shape(mirrored[perm.perm])


def mean_shape(shapes: list[Shape]) -> Shape:
    """Coordinate-wise mean of a nonempty list of same-sized shapes."""
    if not shapes:
        raise SchemaError("mean of empty shape list")
    n = shapes[0].n_points
    if any(s.n_points != n for s in shapes):
        raise SchemaError("shapes differ in landmark count")
    return Shape(np.mean([s.points for s in shapes], axis=0))


def width_asymmetry(shape: Shape) -> float:
    """Left/right extent imbalance about the shape's x-centroid.

    Positive when the shape extends further to the right of its centroid than
    to the left; used as a yaw proxy for shapes without depth information.
    """
    x = shape.points[:, 0]
    c = float(x.mean())
    right = float(x.max()) - c
    left = c - float(x.min())
    denom = right + left
    if denom <= 0:
        return 0.0
    return (right - left) / denom


def segment_angle(shape: Shape, i: int, j: int) -> float:
    """Angle in radians of the segment from landmark i to landmark j."""
    d = shape.points[j] - shape.points[i]
    return float(np.arctan2(d[1], d[0]))


def roll_proxy(left_idx: int, right_idx: int):
    """Statistic factory: inter-ocular segment angle as a roll proxy."""

    def stat(shape: Shape) -> float:
        return segment_angle(shape, left_idx, right_idx)

    return stat


# Kept as a named constant so bandwidth fitting and model serialization agree.
SIGMA_FLOOR = 0.01
