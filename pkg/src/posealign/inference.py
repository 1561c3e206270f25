"""Probabilistic reasoning over the class posterior.

The softmax posterior over K pose classes, combined with the per-class
Gaussian kernels, is a full mixture density over landmark space.  Everything
here is a pure function of that object: marginals (per-landmark heatmaps,
pushforwards through global statistics), conditioning on point evidence, and
point predictions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import PoseClassSet
from .errors import ConfigurationError, NoConsistentClassError, SchemaError
from .shapes import Shape


@dataclass(frozen=True, eq=False)
class PosePosterior:
    """Probability vector over the K pose classes."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.shape[0] < 1:
            raise SchemaError(f"expected 1-D probability vector, got shape {p.shape}")
        if not np.isfinite(p).all() or np.any(p < 0):
            raise SchemaError("posterior entries must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise SchemaError(f"posterior sums to {p.sum()!r}, not 1")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def k(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True, eq=False)
class LandmarkDistribution:
    """Mixture over stacked landmark space: weight, mean, spherical sigma per class."""

    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, N, 2)
    sigmas: np.ndarray  # (K,)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def n_points(self) -> int:
        return self.means.shape[1]

    def density(self, points: np.ndarray) -> np.ndarray:
        """Mixture density at stacked-2N query points, shape (..., 2N)."""
        pts = np.asarray(points, dtype=np.float64)
        d = 2 * self.n_points
        if pts.shape[-1] != d:
            raise SchemaError(f"query dim {pts.shape[-1]} != 2N = {d}")
        flat_means = self.means.reshape(self.k, d)
        diff = pts[..., None, :] - flat_means  # (..., K, 2N)
        sq = (diff * diff).sum(-1)
        norm = (2.0 * np.pi * self.sigmas**2) ** (d / 2.0)
        comp = np.exp(-sq / (2.0 * self.sigmas**2)) / norm
        return comp @ self.weights

    def mean(self) -> np.ndarray:
        """Mixture mean as an (N, 2) landmark array."""
        return np.tensordot(self.weights, self.means, axes=1)


@dataclass(frozen=True)
class Evidence:
    """A user-asserted landmark position in the canonical frame."""

    landmark_index: int
    position: tuple
    tolerance: float

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ConfigurationError(f"evidence tolerance must be > 0, got {self.tolerance}")
        if self.landmark_index < 0:
            raise ConfigurationError(f"negative landmark index {self.landmark_index}")


@dataclass(frozen=True)
class GridSpec:
    """Square evaluation grid over a canonical-frame window."""

    x0: float
    x1: float
    y0: float
    y1: float
    res: int

    def __post_init__(self):
        if self.res < 1 or self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ConfigurationError(f"degenerate grid {self}")

    def centers(self):
        xs = self.x0 + (np.arange(self.res) + 0.5) * (self.x1 - self.x0) / self.res
        ys = self.y0 + (np.arange(self.res) + 0.5) * (self.y1 - self.y0) / self.res
        return xs, ys

    @property
    def cell_area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0) / self.res**2


def posterior(head, feature, temperature: float = 1.0) -> PosePosterior:
    """Softmax over head scores, with max-shift stability."""
    from .classifier import scores, softmax

    if temperature <= 0:
        raise ConfigurationError(f"temperature must be > 0, got {temperature}")
    return PosePosterior(softmax(scores(head, feature) / temperature))


def posterior_from_scores(s: np.ndarray, temperature: float = 1.0) -> PosePosterior:
    from .classifier import softmax

    if temperature <= 0:
        raise ConfigurationError(f"temperature must be > 0, got {temperature}")
    return PosePosterior(softmax(np.asarray(s, dtype=np.float64) / temperature))


def map_class(p: PosePosterior) -> int:
    """Argmax class; ties resolve to the lowest index."""
    return int(p.probs.argmax())


def mixture(p: PosePosterior, classes: PoseClassSet) -> LandmarkDistribution:
    """The landmark-space mixture induced by the class posterior."""
    if p.k != classes.k:
        raise SchemaError(f"posterior K={p.k} does not match classes K={classes.k}")
    return LandmarkDistribution(
        weights=p.probs, means=classes.centers, sigmas=classes.bandwidths
    )


def marginal_heatmap(dist: LandmarkDistribution, landmark_index: int, grid: GridSpec) -> np.ndarray:
    """2-D marginal of one landmark on the grid, normalized to sum 1."""
    if not 0 <= landmark_index < dist.n_points:
        raise SchemaError(f"landmark index {landmark_index} out of range")
    xs, ys = grid.centers()
    mu = dist.means[:, landmark_index, :]  # (K, 2)
    dx = xs[None, :] - mu[:, 0, None]  # (K, R)
    dy = ys[None, :] - mu[:, 1, None]
    s2 = dist.sigmas[:, None] ** 2
    gx = np.exp(-(dx**2) / (2 * s2)) / np.sqrt(2 * np.pi * s2)
    gy = np.exp(-(dy**2) / (2 * s2)) / np.sqrt(2 * np.pi * s2)
    heat = np.einsum("k,kr,kc->rc", dist.weights, gy, gx)
    total = heat.sum()
    if total <= 0:
        # all mass outside the window; return uniform rather than divide by 0
        return np.full((grid.res, grid.res), 1.0 / grid.res**2)
    return heat / total


def marginal_global(
    p: PosePosterior, classes: PoseClassSet, statistic, n_bins: int, value_range=None
):
    """Pushforward of the posterior through a scalar shape statistic.

    Returns (bin_edges, masses) with masses summing to 1.
    """
    if n_bins < 1:
        raise ConfigurationError(f"n_bins must be >= 1, got {n_bins}")
    values = np.array([statistic(classes.center_shape(k)) for k in range(classes.k)])
    if value_range is None:
        lo, hi = float(values.min()), float(values.max())
        if hi <= lo:
            hi = lo + 1e-9
    else:
        lo, hi = value_range
    edges = np.linspace(lo, hi, n_bins + 1)
    which = np.clip(np.digitize(values, edges) - 1, 0, n_bins - 1)
    masses = np.zeros(n_bins)
    np.add.at(masses, which, p.probs)
    return edges, masses


def consistent_classes(classes: PoseClassSet, evidence: Evidence) -> np.ndarray:
    """Boolean mask of classes whose landmark mean lies within the tolerance."""
    j = evidence.landmark_index
    if j >= classes.n_points:
        raise SchemaError(f"landmark index {j} out of range for N={classes.n_points}")
    d = np.linalg.norm(classes.centers[:, j, :] - np.asarray(evidence.position), axis=1)
    return d <= evidence.tolerance


def condition(p: PosePosterior, classes: PoseClassSet, evidence: Evidence) -> PosePosterior:
    """Restrict the posterior to evidence-consistent classes and renormalize.

    If the evidence excludes nothing that carries mass, the posterior is
    returned value-identical (conditioning is exactly idempotent).
    """
    mask = consistent_classes(classes, evidence)
    if not mask.any():
        raise NoConsistentClassError(
            f"no class within {evidence.tolerance} of landmark {evidence.landmark_index} evidence"
        )
    excluded_mass = p.probs[~mask].sum()
    if excluded_mass == 0.0:
        return PosePosterior(p.probs)
    kept = p.probs * mask
    return PosePosterior(kept / kept.sum())


def predict_landmarks(p: PosePosterior, classes: PoseClassSet, mode: str = "map") -> Shape:
    """Point prediction: the MAP class mean or the posterior-mean shape."""
    if p.k != classes.k:
        raise SchemaError(f"posterior K={p.k} does not match classes K={classes.k}")
    if mode == "map":
        return classes.center_shape(map_class(p))
    if mode == "expectation":
        return Shape(np.tensordot(p.probs, classes.centers, axes=1))
    raise ConfigurationError(f"unknown prediction mode {mode!r}")


def top_k_classes(p: PosePosterior, k: int = 5):
    """(class, prob) pairs, descending by prob with index tie-break."""
    order = np.lexsort((np.arange(p.k), -p.probs))[:k]
    return [(int(i), float(p.probs[i])) for i in order]
