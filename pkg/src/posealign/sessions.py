"""Interactive annotation sessions over video frames.

A session holds one posterior per frame.  User evidence (a landmark click)
conditions that frame's posterior; an HMM decode over the conditioned
posteriors propagates the correction through time.  The stored posterior for
a frame always equals the base posterior conditioned on all its accepted
evidence, and every mutation bumps the frame's version.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import NoConsistentClassError, SchemaError
from .inference import Evidence, PosePosterior, condition, map_class, top_k_classes
from .model import AlignmentModel
from .pts import serialize_pts
from .temporal import FrameSequence, build_transitions, viterbi

_session_counter = itertools.count(1)


@dataclass
class FrameState:
    record: object
    base: PosePosterior
    current: PosePosterior
    evidence: list = field(default_factory=list)
    version: int = 1
    decoded_class: int | None = None


class AnnotationSession:
    """Single-writer session state; reads are safe while holding no lock."""

    def __init__(self, session_id: str, model: AlignmentModel, records):
        self.id = session_id
        self.model = model
        self.lock = threading.Lock()
        posteriors = model.posteriors(records)
        self.frames = [FrameState(record=r, base=p, current=p) for r, p in zip(records, posteriors)]

    def frame(self, t: int) -> FrameState:
        if not 0 <= t < len(self.frames):
            raise SchemaError(f"frame {t} out of range (session has {len(self.frames)})")
        return self.frames[t]

    def prediction_class(self, t: int) -> int:
        fs = self.frame(t)
        return fs.decoded_class if fs.decoded_class is not None else map_class(fs.current)

    def prediction_pixels(self, t: int) -> np.ndarray:
        fs = self.frame(t)
        from .shapes import denormalize_shape

        k = self.prediction_class(t)
        if self.model.cascade is not None:
            from .refine import apply_regressor

            shape = apply_regressor(
                self.model.cascade, fs.record.image, k, fs.record.annotation.bbox, self.model.classes
            )
            return denormalize_shape(shape, fs.record.annotation.bbox)
        return denormalize_shape(self.model.classes.center_shape(k), fs.record.annotation.bbox)

    def apply_evidence(self, t: int, evidence: Evidence, expected_version: int | None = None):
        """Condition frame t; raises NoConsistentClassError without mutating."""
        with self.lock:
            fs = self.frame(t)
            if expected_version is not None and expected_version != fs.version:
                raise StaleVersionError(fs.version)
            updated = fs.current
            updated = condition(updated, self.model.classes, evidence)
            fs.evidence.append(evidence)
            fs.current = updated
            fs.version += 1
            # any previous decode is stale once the emission changes
            for other in self.frames:
                other.decoded_class = None
            return fs

    def decode(self, tau_hmm: float | None = None):
        """Viterbi over current (conditioned) posteriors; pins follow evidence."""
        with self.lock:
            tau = self.model.tau if tau_hmm is None else tau_hmm
            trans = build_transitions(self.model.classes, tau)
            seq = FrameSequence(np.stack([fs.current.probs for fs in self.frames]))
            path = viterbi(seq, trans)
            changed = []
            for t, (fs, k) in enumerate(zip(self.frames, path)):
                if fs.decoded_class != int(k):
                    changed.append(t)
                    fs.version += 1
                fs.decoded_class = int(k)
            return path, changed

    def export(self) -> tuple[dict, list]:
        """Per-frame .pts text plus a manifest of evidence counts."""
        files = {}
        manifest = []
        for t, fs in enumerate(self.frames):
            name = f"frame_{t:06d}.pts"
            files[name] = serialize_pts(self.prediction_pixels(t))
            manifest.append({"frame": t, "pts": name, "evidence_count": len(fs.evidence)})
        return files, manifest

    def rebuild_posterior(self, t: int) -> PosePosterior:
        """Recompute base conditioned on the evidence list (consistency check)."""
        fs = self.frame(t)
        p = fs.base
        for ev in fs.evidence:
            p = condition(p, self.model.classes, ev)
        return p


class StaleVersionError(Exception):
    def __init__(self, current_version: int):
        super().__init__(f"stale version, current is {current_version}")
        self.current_version = current_version


class SessionStore:
    """Thread-safe registry mapping session ids to sessions."""

    def __init__(self, model: AlignmentModel, dataset):
        self.model = model
        self.dataset = dataset
        self._sessions = {}
        self._lock = threading.Lock()

    def create(self, video_id: str | None = None, frame_indices=None) -> AnnotationSession:
        if video_id is not None:
            records = self.dataset.video_frames(video_id)
            if not records:
                raise KeyError(f"unknown video id {video_id!r}")
        elif frame_indices is not None:
            records = [self.dataset.records[i] for i in frame_indices]
        else:
            records = list(self.dataset.records)
        if not records:
            raise KeyError("session would contain no frames")
        sid = f"s{next(_session_counter):06d}"
        session = AnnotationSession(sid, self.model, records)
        with self._lock:
            self._sessions[sid] = session
        return session

    def get(self, session_id: str) -> AnnotationSession:
        with self._lock:
            if session_id not in self._sessions:
                raise KeyError(f"unknown session {session_id!r}")
            return self._sessions[session_id]


def pixel_evidence(record, landmark: int, x: float, y: float, tolerance_px: float | None, default_tol: float) -> Evidence:
    """Convert a pixel-space click into canonical-frame evidence."""
    bb = record.annotation.bbox
    pos = ((x - bb.center[0]) / bb.diagonal, (y - bb.center[1]) / bb.diagonal)
    tol = default_tol if tolerance_px is None else tolerance_px / bb.diagonal
    return Evidence(landmark, pos, tol)


def frame_payload(session: AnnotationSession, t: int, top_k: int = 5) -> dict:
    from .shapes import denormalize_shape

    fs = session.frame(t)
    bb = fs.record.annotation.bbox
    ghosts = []
    for c, p in top_k_classes(fs.current, top_k):
        pts = denormalize_shape(session.model.classes.center_shape(c), bb)
        ghosts.append(
            {"class": c, "prob": p, "landmarks": [[float(x), float(y)] for x, y in pts]}
        )
    return {
        "index": t,
        "frame_index": fs.record.frame_index,
        "version": fs.version,
        "map_class": session.prediction_class(t),
        "landmarks": [[float(x), float(y)] for x, y in session.prediction_pixels(t)],
        "top_k": ghosts,
        "bbox": {"x": bb.x, "y": bb.y, "w": bb.w, "h": bb.h},
        "evidence_count": len(fs.evidence),
        "consistent_classes": _consistent_list(session, fs),
    }


def _consistent_list(session, fs, cap: int = 64):
    if not fs.evidence:
        return None
    mask = fs.current.probs > 0
    idx = np.flatnonzero(mask)
    return idx[:cap].tolist()
