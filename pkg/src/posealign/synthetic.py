"""Deterministic synthetic face-shape/image generator.

Each record starts from a frontal 2-D face template (eyes, brows, nose,
mouth, jaw) with a pseudo-depth per landmark.  Sampled parameters deform it:

* ``yaw``    rotates landmarks in the x/depth plane, producing the left/right
  foreshortening asymmetry a real out-of-plane head turn would,
* ``roll``   rotates in the image plane,
* expression coefficients move mouth/brow landmarks along fixed bases,
* identity scale jitters the x/y aspect ratio,

and the image renders the result as a shaded face blob with a smoothed
bright splat per landmark, a brightness ramp tied to yaw, and pixel noise.
Appearance therefore statistically determines pose.  Generation is a pure
function of the config (seed included): same config, same bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, DatasetRecord, DatasetSchema, quantize_image
from .errors import ConfigurationError
from .shapes import BBox, FlipPermutation, RawAnnotation

MIN_LANDMARKS = 5

# Core template: (x, y, depth) per landmark, canonical units, y grows downward.
_CORE = {
    "left_eye": (-0.16, -0.12, 0.20),
    "right_eye": (0.16, -0.12, 0.20),
    "nose_tip": (0.0, 0.02, 0.45),
    "mouth_left": (-0.11, 0.16, 0.25),
    "mouth_right": (0.11, 0.16, 0.25),
    "nose_bridge": (0.0, -0.06, 0.35),
    "mouth_top": (0.0, 0.125, 0.30),
    "mouth_bottom": (0.0, 0.19, 0.30),
    "left_brow": (-0.17, -0.21, 0.25),
    "right_brow": (0.17, -0.21, 0.25),
}
_MIRROR_PAIRS = [("left_eye", "right_eye"), ("mouth_left", "mouth_right"), ("left_brow", "right_brow")]


@dataclass(frozen=True)
class FaceTemplate:
    points: np.ndarray
    depth: np.ndarray
    roles: dict
    flip_perm: FlipPermutation
    expression_basis: np.ndarray  # (n_expr, N, 2)


def face_template(n_landmarks: int) -> FaceTemplate:
    """Frontal template with N landmarks; extra points subdivide the jaw arc."""
    if n_landmarks < MIN_LANDMARKS:
        raise ConfigurationError(
            f"template needs at least {MIN_LANDMARKS} landmarks, got {n_landmarks}"
        )
    names = list(_CORE)[: min(n_landmarks, len(_CORE))]
    pts = [np.array(_CORE[n][:2]) for n in names]
    depth = [_CORE[n][2] for n in names]
    roles = {n: i for i, n in enumerate(names)}

    n_jaw = n_landmarks - len(names)
    for i in range(n_jaw):
        t = (i + 1) / (n_jaw + 1)
        pts.append(np.array([-0.30 * math.cos(math.pi * t), -0.06 + 0.38 * math.sin(math.pi * t)]))
        depth.append(-0.12)
        roles[f"jaw_{i}"] = len(names) + i

    perm = np.arange(n_landmarks)
    for a, b in _MIRROR_PAIRS:
        if a in roles and b in roles:
            perm[roles[a]], perm[roles[b]] = roles[b], roles[a]
    for i in range(n_jaw):
        perm[roles[f"jaw_{i}"]] = roles[f"jaw_{n_jaw - 1 - i}"]

    basis = np.zeros((3, n_landmarks, 2))

    def put(b, name, dx, dy):
        if name in roles:
            basis[b, roles[name]] = (dx, dy)

    # mouth open
    put(0, "mouth_bottom", 0.0, 0.055)
    put(0, "mouth_left", 0.0, 0.018)
    put(0, "mouth_right", 0.0, 0.018)
    put(0, "mouth_top", 0.0, 0.008)
    if n_jaw:
        mid = n_jaw // 2
        put(0, f"jaw_{mid}", 0.0, 0.03)
    # smile
    put(1, "mouth_left", -0.03, -0.02)
    put(1, "mouth_right", 0.03, -0.02)
    put(1, "mouth_top", 0.0, -0.008)
    # brow raise
    put(2, "left_brow", 0.0, -0.035)
    put(2, "right_brow", 0.0, -0.035)
    put(2, "left_eye", 0.0, -0.008)
    put(2, "right_eye", 0.0, -0.008)

    return FaceTemplate(
        points=np.array(pts),
        depth=np.array(depth),
        roles=roles,
        flip_perm=FlipPermutation(perm),
        expression_basis=basis,
    )


@dataclass(frozen=True)
class SyntheticConfig:
    """Generator knobs; every range is (lo, hi) in the parameter's own units."""

    n_landmarks: int = 15
    n_examples: int = 200
    image_size: int = 64
    yaw_range: tuple = (-0.5, 0.5)
    roll_range: tuple = (-0.25, 0.25)
    expression_range: tuple = (-1.0, 1.0)
    scale_range: tuple = (0.9, 1.1)
    noise_level: float = 0.02
    seed: int = 0
    n_videos: int = 0
    frames_per_video: int = 0
    face_scale: float = 0.82
    bbox_margin: float = 0.12

    def __post_init__(self):
        ranges = (self.yaw_range, self.roll_range, self.expression_range, self.scale_range)
        if not all(np.isfinite(r).all() and r[0] <= r[1] for r in ranges):
            raise ConfigurationError("parameter ranges must be finite (lo, hi) pairs")
        total = self.n_examples + self.n_videos * self.frames_per_video
        if total < 1:
            raise ConfigurationError("config generates no records")
        if self.n_landmarks < MIN_LANDMARKS:
            raise ConfigurationError(
                f"n_landmarks must be >= {MIN_LANDMARKS}, got {self.n_landmarks}"
            )


def deform_template(template: FaceTemplate, yaw, roll, expr, sx, sy) -> np.ndarray:
    """Apply expression, aspect, yaw (x/depth rotation), then roll."""
    pts = template.points + np.tensordot(np.asarray(expr), template.expression_basis, axes=1)
    pts = pts * np.array([sx, sy])
    x = pts[:, 0] * math.cos(yaw) - template.depth * math.sin(yaw)
    pts = np.column_stack([x, pts[:, 1]])
    c, s = math.cos(roll), math.sin(roll)
    return pts @ np.array([[c, s], [-s, c]])


def _landmark_bbox(pts_px: np.ndarray, margin: float) -> BBox:
    x0, y0 = pts_px.min(axis=0)
    x1, y1 = pts_px.max(axis=0)
    mw, mh = margin * (x1 - x0), margin * (y1 - y0)
    return BBox(x0 - mw, y0 - mh, (x1 - x0) + 2 * mw, (y1 - y0) + 2 * mh)


def _render(pts_px, yaw, size, noise_level, rng):
    gy, gx = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    cx = cy = size / 2.0
    img = 0.18 + 0.08 * gy / size

    sigma_face = 0.30 * size
    r2 = (gx - cx) ** 2 + (gy - cy) ** 2
    img = img + 0.20 * np.exp(-r2 / (2 * sigma_face**2))

    d2 = (gx[None] - pts_px[:, 0, None, None]) ** 2 + (gy[None] - pts_px[:, 1, None, None]) ** 2
    img = img + (0.5 * np.exp(-d2 / (2 * 1.4**2))).sum(axis=0)

    img = img + 0.12 * math.sin(yaw) * (gx - cx) / (size / 2.0)
    img = img + noise_level * rng.standard_normal((size, size))
    return quantize_image(img)


def _sample_record(template, cfg, rng, params, ref, video_id=None, frame_index=None):
    yaw, roll, expr, sx, sy, jitter = params
    pts = deform_template(template, yaw, roll, expr, sx, sy)
    size = cfg.image_size
    pts_px = size / 2.0 + np.asarray(jitter) + cfg.face_scale * size * pts

    # keep synthetic landmarks strictly inside the raster
    lo = pts_px.min(axis=0)
    hi = pts_px.max(axis=0)
    shift = np.maximum(1.0 - lo, 0.0) - np.maximum(hi - (size - 1.0), 0.0)
    pts_px = pts_px + shift

    image = _render(pts_px, yaw, size, cfg.noise_level, rng)
    meta = {
        "yaw": float(yaw),
        "roll": float(roll),
        "expr": [float(e) for e in expr],
        "sx": float(sx),
        "sy": float(sy),
    }
    return DatasetRecord(
        image=image,
        annotation=RawAnnotation(pts_px, _landmark_bbox(pts_px, cfg.bbox_margin), ref),
        video_id=video_id,
        frame_index=frame_index,
        meta=meta,
    )


def _uniform(rng, rng_pair):
    return rng.uniform(rng_pair[0], rng_pair[1])


def generate_synthetic(config: SyntheticConfig) -> Dataset:
    """Generate stills plus optional smooth-trajectory videos."""
    template = face_template(config.n_landmarks)
    rng = np.random.default_rng(config.seed)
    records = []

    for i in range(config.n_examples):
        params = _draw_params(config, rng)
        records.append(_sample_record(template, config, rng, params, f"still_{i:05d}"))

    for v in range(config.n_videos):
        vid = f"vid{v:03d}"
        traj = _draw_trajectory(config, rng)
        for t in range(config.frames_per_video):
            params = traj(t)
            records.append(
                _sample_record(
                    template, config, rng, params, f"{vid}_f{t:04d}", video_id=vid, frame_index=t
                )
            )

    schema = DatasetSchema(
        n_points=config.n_landmarks,
        flip_perm=template.flip_perm,
        landmark_roles=dict(template.roles),
        image_size=config.image_size,
    )
    return Dataset(records, schema)


def _draw_params(cfg, rng):
    yaw = _uniform(rng, cfg.yaw_range)
    roll = _uniform(rng, cfg.roll_range)
    expr = rng.uniform(cfg.expression_range[0], cfg.expression_range[1], size=3)
    sx = _uniform(rng, cfg.scale_range)
    sy = _uniform(rng, cfg.scale_range)
    jitter = rng.uniform(-2.0, 2.0, size=2)
    return yaw, roll, expr, sx, sy, jitter


def _draw_trajectory(cfg, rng):
    """Per-video smooth parameter curves: constant identity, sinusoidal pose."""

    def osc(lo, hi):
        mid = rng.uniform(lo, hi)
        amp = rng.uniform(0.0, 0.5 * (hi - lo) / 2.0)
        period = rng.uniform(20.0, 60.0)
        phase = rng.uniform(0.0, 2 * math.pi)

        def f(t):
            return float(np.clip(mid + amp * math.sin(2 * math.pi * t / period + phase), lo, hi))

        return f

    yaw_f = osc(*cfg.yaw_range)
    roll_f = osc(*cfg.roll_range)
    expr_f = [osc(*cfg.expression_range) for _ in range(3)]
    sx = _uniform(rng, cfg.scale_range)
    sy = _uniform(rng, cfg.scale_range)
    jit_f = osc(-2.0, 2.0)

    def traj(t):
        expr = np.array([f(t) for f in expr_f])
        return yaw_f(t), roll_f(t), expr, sx, sy, (jit_f(t), jit_f(t + 7.0))

    return traj
