"""Linear regression around the classifier: detection-window refinement and
pose-class cascaded regressors for fine-scale localization.

Both use closed-form ridge regression.  The cascade groups pose classes by
k-means over their prototypes, pools the member examples of each group's
classes (the same example sharing as the losses), and fits one linear map
per cascade level from local pixel samples to a canonical-frame shape
update, applied sequentially during training exactly as at test time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import MembershipSets, PoseClassSet, assign_classes, kmeans_shapes
from .data import sample_pixels
from .errors import ConfigurationError, SchemaError
from .features import FeatureExtractor
from .shapes import BBox, Shape, normalize_shape

LOG_DELTA_CLAMP = 1.0


def ridge_fit(x: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Solve (X'X + lam I) B = X'Y with an appended intercept column."""
    xa = np.column_stack([x, np.ones(len(x))])
    gram = xa.T @ xa + lam * np.eye(xa.shape[1])
    rhs = xa.T @ y
    try:
        return np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        raise ConfigurationError(
            "normal matrix is singular; use a nonzero ridge parameter"
        ) from None


def ridge_apply(beta: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.column_stack([x, np.ones(len(x))]) @ beta


# ---------------------------------------------------------------------------
# Detection refinement
# ---------------------------------------------------------------------------


def bbox_deltas(proposal: BBox, target: BBox) -> np.ndarray:
    """R-CNN-style transform from a proposal box to a target box."""
    return np.array(
        [
            (target.x + target.w / 2 - proposal.x - proposal.w / 2) / proposal.w,
            (target.y + target.h / 2 - proposal.y - proposal.h / 2) / proposal.h,
            np.log(target.w / proposal.w),
            np.log(target.h / proposal.h),
        ]
    )


def apply_bbox_deltas(proposal: BBox, deltas) -> BBox:
    """Apply (dx/w, dy/h, log dw, log dh); log terms clamp to +-1."""
    dx, dy, dw, dh = np.asarray(deltas, dtype=np.float64)
    cx = proposal.x + proposal.w / 2 + dx * proposal.w
    cy = proposal.y + proposal.h / 2 + dy * proposal.h
    w = proposal.w * np.exp(np.clip(dw, -LOG_DELTA_CLAMP, LOG_DELTA_CLAMP))
    h = proposal.h * np.exp(np.clip(dh, -LOG_DELTA_CLAMP, LOG_DELTA_CLAMP))
    return BBox(cx - w / 2, cy - h / 2, w, h)


def perturb_detections(dataset, seed, shift_frac: float = 0.12, scale_frac: float = 0.25) -> list:
    """Simulated noisy detector output: jittered copies of the gt boxes."""
    rng = np.random.default_rng(seed)
    out = []
    for rec in dataset.records:
        bb = rec.annotation.bbox
        dx = rng.uniform(-shift_frac, shift_frac) * bb.w
        dy = rng.uniform(-shift_frac, shift_frac) * bb.h
        sw = np.exp(rng.uniform(-scale_frac, scale_frac))
        sh = np.exp(rng.uniform(-scale_frac, scale_frac))
        w, h = bb.w * sw, bb.h * sh
        out.append(BBox(bb.x + bb.w / 2 + dx - w / 2, bb.y + bb.h / 2 + dy - h / 2, w, h))
    return out


@dataclass(frozen=True, eq=False)
class BBoxRegressor:
    """Linear map from window features to box deltas."""

    beta: np.ndarray  # (D+1, 4) including intercept row
    lam: float

    def predict(self, feature: np.ndarray) -> np.ndarray:
        return ridge_apply(self.beta, np.asarray(feature)[None])[0]


def train_bbox_regressor(
    dataset, detections: list, extractor: FeatureExtractor, lam: float, crop_margin: float = 0.2
) -> BBoxRegressor:
    """Ridge from features of the detected window to gt-restoring deltas."""
    from .data import crop_window

    if len(detections) != len(dataset.records):
        raise SchemaError("one detection box per record required")
    crops = np.stack(
        [
            crop_window(rec.image, det, extractor.input_size, crop_margin)
            for rec, det in zip(dataset.records, detections)
        ]
    )
    feats = extractor.extract_batch(crops)
    targets = np.stack(
        [bbox_deltas(det, rec.annotation.bbox) for rec, det in zip(dataset.records, detections)]
    )
    return BBoxRegressor(beta=ridge_fit(feats, targets, lam), lam=lam)


def refine_bbox(
    reg: BBoxRegressor, extractor: FeatureExtractor, image, bbox: BBox, crop_margin: float = 0.2
) -> BBox:
    """One-shot refinement of a detection window."""
    from .data import crop_window

    feat = extractor.extract(crop_window(image, bbox, extractor.input_size, crop_margin))
    return apply_bbox_deltas(bbox, reg.predict(feat))


# ---------------------------------------------------------------------------
# Pose-class cascaded regressors
# ---------------------------------------------------------------------------


def _patch_offsets(grid: int) -> np.ndarray:
    ticks = np.linspace(-1.0, 1.0, grid)
    gx, gy = np.meshgrid(ticks, ticks)
    return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass(frozen=True, eq=False)
class CascadedRegressor:
    """Per-group cascades of linear shape updates from local pixel samples."""

    betas: np.ndarray  # (G, L, F+1, 2N)
    group_of_class: np.ndarray  # (K,)
    patch_radius: float  # fraction of the bbox diagonal
    grid: int

    @property
    def n_groups(self) -> int:
        return self.betas.shape[0]

    @property
    def n_levels(self) -> int:
        return self.betas.shape[1]


def _cascade_features(images, bboxes, current, patch_radius, offsets):
    """Pixel samples around each landmark of each instance's current shape.

    ``current`` is (B, N, 2) canonical; returns (B, N * len(offsets)).
    """
    feats = np.empty((len(images), current.shape[1] * len(offsets)))
    for i, (img, bb) in enumerate(zip(images, bboxes)):
        diag = bb.diagonal
        pts = current[i] * diag + bb.center  # (N, 2) pixels
        sx = pts[:, 0, None] + patch_radius * diag * offsets[None, :, 0]
        sy = pts[:, 1, None] + patch_radius * diag * offsets[None, :, 1]
        feats[i] = sample_pixels(img, sx.ravel(), sy.ravel())
    return feats


def group_classes(classes: PoseClassSet, g: int, seed) -> np.ndarray:
    """k-means over class prototypes; returns the class -> group map."""
    shapes = [classes.center_shape(k) for k in range(classes.k)]
    groups = kmeans_shapes(shapes, min(g, classes.k), seed)
    return assign_classes(groups, shapes)


def train_pose_regressors(
    dataset,
    classes: PoseClassSet,
    memberships: MembershipSets,
    n_groups: int = 100,
    n_levels: int = 7,
    lam: float = 1.0,
    patch_radius: float = 0.06,
    grid: int = 3,
    seed: int = 0,
    max_instances_per_group: int = 2000,
    level_errors_out: list | None = None,
    instances_out: dict | None = None,
) -> CascadedRegressor:
    """Fit grouped cascades with example sharing.

    Training instances are (example, start class) pairs for every class in
    the example's membership set; each instance initializes at the class
    prototype and regresses toward the example's ground truth, re-fitting
    features after every level.  ``level_errors_out`` receives the mean
    point-to-point training error after each level (level 0 entry is the
    initialization error).
    """
    if n_groups < 1 or n_levels < 1:
        raise ConfigurationError("need at least one group and one level")
    records = dataset.records if hasattr(dataset, "records") else dataset
    gts = np.stack([normalize_shape(r.annotation).points for r in records])
    n = gts.shape[1]
    rng = np.random.default_rng(seed)

    for attempt in range(10):
        group_map = group_classes(classes, n_groups, seed + attempt)
        g_eff = int(group_map.max()) + 1
        instances = [[] for _ in range(g_eff)]
        for k in range(classes.k):
            g = group_map[k]
            for i in memberships.inverse[k]:
                instances[g].append((int(i), k))
        if all(len(inst) > 0 for inst in instances):
            break
    else:
        raise ConfigurationError("could not form groups with nonempty training sets")

    if instances_out is not None:
        instances_out.update({g: list(inst) for g, inst in enumerate(instances)})

    offsets = _patch_offsets(grid)
    f_dim = n * len(offsets)
    betas = np.zeros((g_eff, n_levels, f_dim + 1, 2 * n))

    # flatten capped instances with group ownership for shared level bookkeeping
    flat = []
    for g, inst in enumerate(instances):
        if len(inst) > max_instances_per_group:
            pick = rng.choice(len(inst), max_instances_per_group, replace=False)
            inst = [inst[j] for j in sorted(pick)]
        flat.extend((g, i, k) for i, k in inst)

    imgs = [records[i].image for _, i, _ in flat]
    boxes = [records[i].annotation.bbox for _, i, _ in flat]
    target = np.stack([gts[i] for _, i, _ in flat]).reshape(len(flat), 2 * n)
    current = np.stack([classes.centers[k] for _, _, k in flat])
    owner = np.array([g for g, _, _ in flat])

    def mean_pt_err(cur):
        d = (cur - target.reshape(len(flat), n, 2)) ** 2
        return float(np.sqrt(d.sum(-1).mean(-1)).mean())

    if level_errors_out is not None:
        level_errors_out.append(mean_pt_err(current))

    for level in range(n_levels):
        feats = _cascade_features(imgs, boxes, current, patch_radius, offsets)
        residual = target - current.reshape(len(flat), 2 * n)
        for g in range(g_eff):
            sel = owner == g
            if not sel.any():
                continue
            beta = ridge_fit(feats[sel], residual[sel], lam)
            betas[g, level] = beta
            update = ridge_apply(beta, feats[sel])
            current[sel] += update.reshape(-1, n, 2)
        if level_errors_out is not None:
            level_errors_out.append(mean_pt_err(current))

    return CascadedRegressor(
        betas=betas, group_of_class=group_map, patch_radius=patch_radius, grid=grid
    )


def select_cascade_lambda(
    train_dataset,
    val_dataset,
    classes: PoseClassSet,
    memberships: MembershipSets,
    val_classes,
    grid=(0.1, 1.0, 10.0),
    **cascade_kwargs,
):
    """Pick the ridge parameter by validation landmark error over a small grid.

    ``val_classes`` gives each validation record's predicted class (the
    cascade initialization).  Returns (best_lambda, table).
    """
    from .evaluation import canonical_errors

    gts = np.stack([normalize_shape(r.annotation).points for r in val_dataset.records])
    best = None
    table = []
    for lam in grid:
        cascade = train_pose_regressors(
            train_dataset, classes, memberships, lam=lam, **cascade_kwargs
        )
        preds = np.stack(
            [
                apply_regressor(cascade, r.image, int(k), r.annotation.bbox, classes).points
                for r, k in zip(val_dataset.records, val_classes)
            ]
        )
        err = float(canonical_errors(preds, gts).mean())
        table.append({"lam": float(lam), "val_error": err})
        if best is None or err < best[1]:
            best = (float(lam), err)
    return best[0], table


def apply_regressor(cascade: CascadedRegressor, image, class_index: int, bbox: BBox, classes: PoseClassSet) -> Shape:
    """Run the class's group cascade from the class prototype."""
    if not 0 <= class_index < len(cascade.group_of_class):
        raise SchemaError(f"class index {class_index} out of range")
    g = cascade.group_of_class[class_index]
    offsets = _patch_offsets(cascade.grid)
    current = classes.centers[class_index][None].copy()
    for level in range(cascade.n_levels):
        feats = _cascade_features([image], [bbox], current, cascade.patch_radius, offsets)
        update = ridge_apply(cascade.betas[g, level], feats)
        current += update.reshape(1, -1, 2)
    return Shape(current[0])
