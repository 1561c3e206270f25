"""Discrete pose-class vocabulary: k-means centers, kernel bandwidths, and
the overlapping membership sets that drive example sharing."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, SchemaError
from .shapes import SIGMA_FLOOR, Shape

KMEANS_TOL = 1e-6
KMEANS_MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class PoseClassSet:
    """K shape prototypes with per-class spherical kernel bandwidths."""

    centers: np.ndarray  # (K, N, 2)
    bandwidths: np.ndarray  # (K,)
    exemplar: bool = False

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=np.float64)
        b = np.asarray(self.bandwidths, dtype=np.float64)
        if c.ndim != 3 or c.shape[2] != 2 or c.shape[0] < 1:
            raise SchemaError(f"expected (K, N, 2) centers, got {c.shape}")
        if b.shape != (c.shape[0],):
            raise SchemaError(f"bandwidths shape {b.shape} does not match K={c.shape[0]}")
        if np.any(b <= 0):
            raise SchemaError("bandwidths must be positive")
        c = c.copy()
        b = b.copy()
        c.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "bandwidths", b)

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def n_points(self) -> int:
        return self.centers.shape[1]

    @property
    def stacked_centers(self) -> np.ndarray:
        return self.centers.reshape(self.k, -1)

    def center_shape(self, k: int) -> Shape:
        return Shape(self.centers[k])


@dataclass(frozen=True, eq=False)
class MembershipSets:
    """Per-example sets of pose classes within tau, plus the inverse index."""

    sets: list  # list of sorted int arrays, one per example
    tau: float
    inverse: list  # list of sorted int arrays, one per class

    @property
    def n_examples(self) -> int:
        return len(self.sets)

    @property
    def n_classes(self) -> int:
        return len(self.inverse)

    def sizes(self) -> np.ndarray:
        return np.array([len(s) for s in self.sets])

    def contains(self, example: int, cls: int) -> bool:
        return bool(np.isin(cls, self.sets[example]))


def _stack(shapes) -> np.ndarray:
    n = shapes[0].n_points
    if any(s.n_points != n for s in shapes):
        raise SchemaError("shapes differ in landmark count")
    return np.array([s.stacked for s in shapes])


def _pairwise_sq(x, c):
    # ||x - c||^2 via the expansion; clip tiny negatives from cancellation
    d2 = (x * x).sum(1)[:, None] + (c * c).sum(1)[None, :] - 2.0 * (x @ c.T)
    return np.maximum(d2, 0.0)


def _kmeans_pp_init(x, k, rng):
    m = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(m)]
    d2 = ((x - centers[0]) ** 2).sum(1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a center; pick uniformly
            idx = rng.integers(m)
        else:
            idx = rng.choice(m, p=d2 / total)
        centers[j] = x[idx]
        d2 = np.minimum(d2, ((x - centers[j]) ** 2).sum(1))
    return centers


def kmeans_shapes(shapes: list, k: int, seed, sse_log: list | None = None) -> PoseClassSet:
    """Lloyd's algorithm with k-means++ seeding over stacked 2N vectors.

    K equal to the number of shapes bypasses clustering entirely: every
    input becomes its own (exemplar) class, order preserved.  Bandwidths of
    the returned set are the floor value; fit them separately.
    """
    m = len(shapes)
    if k > m:
        raise ConfigurationError(f"K={k} exceeds number of shapes M={m}")
    if k < 1:
        raise ConfigurationError(f"K must be >= 1, got {k}")
    x = _stack(shapes)
    n = shapes[0].n_points

    if k == m:
        return PoseClassSet(
            centers=x.reshape(m, n, 2), bandwidths=np.full(m, SIGMA_FLOOR), exemplar=True
        )

    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(x, k, rng)
    for _ in range(KMEANS_MAX_ITER):
        d2 = _pairwise_sq(x, centers)
        assign = d2.argmin(1)
        new_centers = centers.copy()
        for j in range(k):
            mask = assign == j
            if mask.any():
                new_centers[j] = x[mask].mean(0)
            else:
                # re-seed an empty cluster at the point farthest from its center
                farthest = d2[np.arange(m), assign].argmax()
                new_centers[j] = x[farthest]
                assign[farthest] = j
        if sse_log is not None:
            res = x - new_centers[assign]
            sse_log.append(float((res * res).sum()))
        shift = np.abs(new_centers - centers).max()
        centers = new_centers
        if shift < KMEANS_TOL:
            break

    return PoseClassSet(centers=centers.reshape(k, n, 2), bandwidths=np.full(k, SIGMA_FLOOR))


def assign_classes(classes: PoseClassSet, shapes: list) -> np.ndarray:
    """Nearest-center index for each shape."""
    x = _stack(shapes)
    if x.shape[1] != classes.stacked_centers.shape[1]:
        raise SchemaError("shape size does not match class centers")
    return _pairwise_sq(x, classes.stacked_centers).argmin(1)


def fit_bandwidths(classes: PoseClassSet, shapes: list, assignments) -> PoseClassSet:
    """Per-class sigma = RMS member distance to the center, floored."""
    x = _stack(shapes)
    c = classes.stacked_centers
    assignments = np.asarray(assignments)
    sigma = np.full(classes.k, SIGMA_FLOOR)
    for j in range(classes.k):
        mask = assignments == j
        if mask.any():
            d2 = ((x[mask] - c[j]) ** 2).sum(1)
            sigma[j] = max(float(np.sqrt(d2.mean())), SIGMA_FLOOR)
    return replace(classes, bandwidths=sigma)


def build_pose_classes(shapes: list, k: int, seed) -> tuple[PoseClassSet, np.ndarray]:
    """Cluster, assign, and fit bandwidths in one call."""
    classes = kmeans_shapes(shapes, k, seed)
    assignments = assign_classes(classes, shapes)
    return fit_bandwidths(classes, shapes, assignments), assignments


def membership_sets(classes: PoseClassSet, shapes: list, tau: float) -> MembershipSets:
    """All classes within tau of each shape; the nearest is always included."""
    if tau < 0:
        raise ConfigurationError(f"tau must be >= 0, got {tau}")
    x = _stack(shapes)
    d2 = _pairwise_sq(x, classes.stacked_centers)
    within = d2 <= tau * tau
    nearest = d2.argmin(1)
    within[np.arange(len(shapes)), nearest] = True

    sets = [np.flatnonzero(row) for row in within]
    inverse = [np.flatnonzero(col) for col in within.T]
    return MembershipSets(sets=sets, tau=tau, inverse=inverse)


def membership_histogram(memberships: MembershipSets) -> np.ndarray:
    """Counts of examples per |M_i| bucket; index equals the set size."""
    return np.bincount(memberships.sizes())
