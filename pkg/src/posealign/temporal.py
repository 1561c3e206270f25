"""Video-time reasoning: pose-class HMM decoding and low-pass smoothing.

The HMM has one state per pose class and only allows transitions between
classes whose prototypes are within a distance threshold (self-transitions
always allowed).  Decoding is max-product in log space; among equal-score
paths the lexicographically smallest (frame by frame, lowest class index
first) is returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import PoseClassSet
from .errors import ConfigurationError, InfeasiblePathError, SchemaError


@dataclass(frozen=True, eq=False)
class TransitionStructure:
    """Sparse allowed-successor sets with a two-parameter weight model.

    Row weights are self_weight for staying and neighbor_weight for each
    allowed move, normalized per row so outgoing weights sum to one.
    """

    neighbors: list  # per class: sorted int array of allowed successors, self excluded
    self_weight: float
    neighbor_weight: float

    def __post_init__(self):
        if self.self_weight <= 0 or self.neighbor_weight <= 0:
            raise ConfigurationError("transition weights must be positive")

    @property
    def k(self) -> int:
        return len(self.neighbors)

    def log_matrix(self) -> np.ndarray:
        """Dense (K, K) row-normalized log-transition matrix, -inf if disallowed."""
        k = self.k
        out = np.full((k, k), -np.inf)
        for a in range(k):
            nbrs = self.neighbors[a]
            z = self.self_weight + self.neighbor_weight * len(nbrs)
            out[a, a] = np.log(self.self_weight / z)
            if len(nbrs):
                out[a, nbrs] = np.log(self.neighbor_weight / z)
        return out

    def allowed(self, a: int, b: int) -> bool:
        return a == b or bool(np.isin(b, self.neighbors[a]))


@dataclass(frozen=True, eq=False)
class FrameSequence:
    """Per-frame class posteriors for one video segment."""

    probs: np.ndarray  # (T, K)
    frame_indices: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] < 1:
            raise SchemaError(f"expected (T, K) posterior stack, got {p.shape}")
        object.__setattr__(self, "probs", p)
        if self.frame_indices is None:
            object.__setattr__(self, "frame_indices", np.arange(p.shape[0]))

    @property
    def t(self) -> int:
        return self.probs.shape[0]

    @property
    def k(self) -> int:
        return self.probs.shape[1]


def build_transitions(
    classes: PoseClassSet, tau_hmm: float, self_weight: float = 2.0, neighbor_weight: float = 1.0
) -> TransitionStructure:
    """Allow transitions between prototypes within tau_hmm of each other."""
    if tau_hmm < 0:
        raise ConfigurationError(f"tau_hmm must be >= 0, got {tau_hmm}")
    c = classes.stacked_centers
    d2 = (c * c).sum(1)[:, None] + (c * c).sum(1)[None, :] - 2.0 * (c @ c.T)
    within = np.maximum(d2, 0.0) <= tau_hmm * tau_hmm
    np.fill_diagonal(within, False)
    neighbors = [np.flatnonzero(row) for row in within]
    return TransitionStructure(neighbors, self_weight, neighbor_weight)


def viterbi(seq: FrameSequence, trans: TransitionStructure) -> np.ndarray:
    """Max-product decode of the most probable class path.

    Maximizes sum_t log p_t(k_t) + sum_t log w(k_{t-1} -> k_t).  The DP runs
    backward so the forward selection pass can break ties toward the lowest
    class index at every frame, yielding the lexicographically smallest
    optimal path.
    """
    if seq.k != trans.k:
        raise SchemaError(f"sequence K={seq.k} does not match transitions K={trans.k}")
    with np.errstate(divide="ignore"):
        logp = np.log(seq.probs)
    a = trans.log_matrix()

    # forward feasibility sweep: name the first frame where every state dies
    alive = np.isfinite(logp[0])
    if not alive.any():
        raise InfeasiblePathError(int(seq.frame_indices[0]))
    for t in range(1, seq.t):
        alive = np.isfinite(logp[t]) & (np.isfinite(a[alive]).any(axis=0))
        if not alive.any():
            raise InfeasiblePathError(int(seq.frame_indices[t]))

    # beta[t, k] = best log score of a path suffix starting at (t, k)
    beta = np.empty_like(logp)
    choice = np.empty((seq.t - 1, seq.k), dtype=np.int64)
    beta[-1] = logp[-1]
    for t in range(seq.t - 2, -1, -1):
        cand = a + beta[t + 1][None, :]  # (from, to)
        choice[t] = cand.argmax(1)  # first max = lowest successor index
        beta[t] = logp[t] + cand[np.arange(seq.k), choice[t]]

    path = np.empty(seq.t, dtype=np.int64)
    path[0] = beta[0].argmax()
    for t in range(seq.t - 1):
        path[t + 1] = choice[t, path[t]]
    return path


def path_score(seq: FrameSequence, trans: TransitionStructure, path) -> float:
    """Log score of a given path; -inf if it uses a forbidden transition."""
    path = np.asarray(path)
    with np.errstate(divide="ignore"):
        logp = np.log(seq.probs)
    a = trans.log_matrix()
    score = logp[np.arange(seq.t), path].sum()
    if seq.t > 1:
        score += a[path[:-1], path[1:]].sum()
    return float(score)


def lowpass_smooth(shapes: list, window: int = 3) -> list:
    """Centered moving average over consecutive frames of landmark arrays.

    Boundary frames average over the frames that exist (truncated window).
    Accepts Shapes or raw (N, 2) arrays and returns the same kind.
    """
    if window < 1 or window % 2 == 0:
        raise ConfigurationError(f"window must be odd and >= 1, got {window}")
    if not shapes:
        raise SchemaError("empty sequence")
    from .shapes import Shape

    as_shape = isinstance(shapes[0], Shape)
    arrs = np.array([s.points if as_shape else np.asarray(s, dtype=np.float64) for s in shapes])
    half = window // 2
    out = []
    for t in range(len(arrs)):
        lo, hi = max(0, t - half), min(len(arrs), t + half + 1)
        out.append(arrs[lo:hi].mean(axis=0))
    return [Shape(a) if as_shape else a for a in out]
