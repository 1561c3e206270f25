"""Metrics and the desk-scale experiment suite.

Errors are point-to-point RMS over landmarks normalized by the ground-truth
box diagonal, so canonical-frame distances and normalized pixel errors agree
exactly.  Experiments cover loss-vs-K scaling, hard-subset construction, and
the simulated interactive-annotation study.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .classifier import TrainConfig, scores_batch, train
from .clustering import build_pose_classes, membership_sets
from .errors import NoConsistentClassError, SchemaError
from .inference import Evidence, condition, map_class, posterior_from_scores
from .model import AlignmentModel, extract_features
from .shapes import RawAnnotation, Shape, mean_shape, normalize_shape, shape_distance

logger = logging.getLogger(__name__)

FAILURE_THRESHOLD = 0.08


@dataclass(frozen=True)
class ErrorRecord:
    error: float
    predictor: str
    frame: str


@dataclass(frozen=True, eq=False)
class CedCurve:
    thresholds: np.ndarray
    fractions: np.ndarray
    auc: float
    failure_rate: float  # percent


def pt_pt_error(pred_pixels, gt: RawAnnotation) -> float:
    """RMS landmark distance divided by the gt box diagonal."""
    pred = np.asarray(pred_pixels, dtype=np.float64)
    if pred.shape != gt.points.shape:
        raise SchemaError(f"prediction shape {pred.shape} != gt shape {gt.points.shape}")
    d2 = ((pred - gt.points) ** 2).sum(axis=1)
    return float(np.sqrt(d2.mean()) / gt.bbox.diagonal)


def canonical_errors(pred_canonical: np.ndarray, gt_canonical: np.ndarray) -> np.ndarray:
    """Batch of normalized pt-pt errors from canonical-frame coordinates."""
    d2 = ((pred_canonical - gt_canonical) ** 2).sum(axis=-1)
    return np.sqrt(d2.mean(axis=-1))


def ced_stats(errors, threshold: float = FAILURE_THRESHOLD, grid_points: int = 200) -> CedCurve:
    """Cumulative error distribution over [0, threshold] with AUC and FR."""
    errs = np.asarray(errors, dtype=np.float64)
    if errs.size == 0:
        raise SchemaError("no errors to summarize")
    ts = np.linspace(0.0, threshold, grid_points)
    fractions = (errs[None, :] <= ts[:, None]).mean(axis=1)
    return CedCurve(
        thresholds=ts,
        fractions=fractions,
        auc=float(fractions.mean()),
        failure_rate=float((errs > threshold).mean() * 100.0),
    )


def hard_subset(dataset, fraction: float = 0.1, reference: Shape | None = None):
    """The frames whose gt shape deviates most from the reference mean shape."""
    from .data import Dataset

    if not 0 < fraction <= 1:
        raise SchemaError(f"fraction must be in (0, 1], got {fraction}")
    shapes = [normalize_shape(r.annotation) for r in dataset.records]
    if reference is None:
        reference = mean_shape(shapes)
    dists = np.array([shape_distance(s, reference) for s in shapes])
    take = math.ceil(fraction * len(dataset.records))
    order = sorted(range(len(dists)), key=lambda i: (-dists[i], i))[:take]
    return Dataset([dataset.records[i] for i in sorted(order)], dataset.schema)


# ---------------------------------------------------------------------------
# Model evaluation helpers
# ---------------------------------------------------------------------------


def evaluate_model(model: AlignmentModel, dataset, use_cascade: bool = False) -> np.ndarray:
    """Normalized pt-pt error of the model on every record."""
    posteriors = model.posteriors(dataset.records)
    errs = []
    for rec, p in zip(dataset.records, posteriors):
        pred = model.predict_pixels(rec, p, use_cascade=use_cascade)
        errs.append(pt_pt_error(pred, rec.annotation))
    return np.array(errs)


def mean_shape_errors(train_dataset, eval_dataset) -> np.ndarray:
    """Errors of always predicting the training mean shape."""
    ref = mean_shape([normalize_shape(r.annotation) for r in train_dataset.records])
    gts = np.stack([normalize_shape(r.annotation).points for r in eval_dataset.records])
    return canonical_errors(ref.points[None], gts)


# ---------------------------------------------------------------------------
# Loss-vs-K experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentCell:
    k: int
    loss: str
    train_error: float
    val_error: float
    train_ml_error: float
    val_ml_error: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _head_errors(head, features, classes, gt_shapes, memberships):
    s = scores_batch(head, features)
    pred = s.argmax(axis=1)
    gts = np.stack([sh.points for sh in gt_shapes])
    lmk = canonical_errors(classes.centers[pred], gts)
    wrong = np.array([not np.isin(pred[i], memberships.sets[i]) for i in range(len(pred))])
    return float(lmk.mean()), float(wrong.mean())


def loss_scaling_experiment(
    train_dataset,
    val_dataset,
    extractor,
    k_grid,
    losses,
    config: TrainConfig,
    tau: float,
    crop_margin: float = 0.2,
) -> list:
    """Train every (K, loss) cell and report landmark and multi-label errors.

    Features are extracted once; each cell reuses them, so cells differ only
    in the class vocabulary and loss.  Deterministic given config.seed.
    """
    train_shapes = [normalize_shape(r.annotation) for r in train_dataset.records]
    val_shapes = [normalize_shape(r.annotation) for r in val_dataset.records]
    f_train = extract_features(extractor, train_dataset.records, crop_margin)
    f_val = extract_features(extractor, val_dataset.records, crop_margin)

    cells = []
    for k in k_grid:
        classes, assignments = build_pose_classes(train_shapes, k, config.seed)
        ms_train = membership_sets(classes, train_shapes, tau)
        ms_val = membership_sets(classes, val_shapes, tau)
        for loss in losses:
            cell_cfg = replace_loss(config, loss)
            head = train(
                train_dataset,
                extractor,
                classes,
                ms_train,
                cell_cfg,
                features=f_train,
                assignments=assignments,
            )
            tr_err, tr_ml = _head_errors(head, f_train, classes, train_shapes, ms_train)
            va_err, va_ml = _head_errors(head, f_val, classes, val_shapes, ms_val)
            cells.append(ExperimentCell(k, loss, tr_err, va_err, tr_ml, va_ml))
            logger.info(
                "K=%d loss=%s: val %.4f train %.4f (ml %.3f/%.3f)",
                k, loss, va_err, tr_err, va_ml, tr_ml,
            )
    return cells


def replace_loss(config: TrainConfig, loss: str) -> TrainConfig:
    from dataclasses import replace

    return replace(config, loss=loss)


def select_tau(
    train_dataset,
    val_dataset,
    extractor,
    k: int,
    config: TrainConfig,
    grid=None,
    crop_margin: float = 0.2,
):
    """Pick tau by minimizing validation landmark error over a small grid."""
    train_shapes = [normalize_shape(r.annotation) for r in train_dataset.records]
    val_shapes = [normalize_shape(r.annotation) for r in val_dataset.records]
    if grid is None:
        grid = default_tau_grid(train_shapes)
    f_train = extract_features(extractor, train_dataset.records, crop_margin)
    f_val = extract_features(extractor, val_dataset.records, crop_margin)
    classes, assignments = build_pose_classes(train_shapes, k, config.seed)

    best = None
    table = []
    for tau in grid:
        ms = membership_sets(classes, train_shapes, tau)
        head = train(
            train_dataset, extractor, classes, ms, config,
            features=f_train, assignments=assignments,
        )
        ms_val = membership_sets(classes, val_shapes, tau)
        err, _ = _head_errors(head, f_val, classes, val_shapes, ms_val)
        table.append({"tau": float(tau), "val_error": err})
        if best is None or err < best[1]:
            best = (float(tau), err)
    logger.info("tau selection: %s -> %.4f", best[0], best[1])
    return best[0], table


def default_tau_grid(shapes, quantiles=(0.02, 0.05, 0.10), sample: int = 400, seed: int = 0):
    """Candidate taus from quantiles of sampled pairwise shape distances."""
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(shapes), min(sample, len(shapes)), replace=False)
    pts = np.stack([shapes[i].stacked for i in idx])
    d2 = np.maximum(
        (pts * pts).sum(1)[:, None] + (pts * pts).sum(1)[None, :] - 2 * pts @ pts.T, 0.0
    )
    d = np.sqrt(d2[np.triu_indices(len(idx), k=1)])
    return [float(np.quantile(d, q)) for q in quantiles]


# ---------------------------------------------------------------------------
# Interactive annotation simulation
# ---------------------------------------------------------------------------


def interactive_eval(
    dataset,
    model: AlignmentModel,
    policies=("none", "fixed_point", "best_point"),
    landmark: int | None = None,
    tau_e: float | None = None,
) -> dict:
    """Failure rates for unconditioned, 1-point, and oracle-best-point policies.

    Conditioning uses the ground-truth position of the chosen landmark; when
    no class is consistent the frame falls back to the unconditioned
    prediction (counted in the report).
    """
    if landmark is None:
        landmark = model.schema.nose_index
    if tau_e is None:
        tau_e = model.tau_evidence
    posteriors = model.posteriors(dataset.records)
    gts = [normalize_shape(r.annotation) for r in dataset.records]
    n = model.schema.n_points

    def conditioned_error(p, gt, j):
        ev = Evidence(j, (float(gt.points[j, 0]), float(gt.points[j, 1])), tau_e)
        try:
            pc = condition(p, model.classes, ev)
        except NoConsistentClassError:
            return None
        pred = model.classes.centers[map_class(pc)]
        return float(canonical_errors(pred[None], gt.points[None])[0])

    report = {}
    for policy in policies:
        errs = np.empty(len(dataset.records))
        fallbacks = 0
        for i, (p, gt) in enumerate(zip(posteriors, gts)):
            base = float(
                canonical_errors(model.classes.centers[map_class(p)][None], gt.points[None])[0]
            )
            if policy == "none":
                errs[i] = base
                continue
            if policy == "fixed_point":
                e = conditioned_error(p, gt, landmark)
                if e is None:
                    fallbacks += 1
                    e = base
                errs[i] = e
            elif policy == "best_point":
                cand = [conditioned_error(p, gt, j) for j in range(n)]
                usable = [e for e in cand if e is not None]
                if not usable:
                    fallbacks += 1
                    usable = [base]
                errs[i] = min(usable)
            else:
                raise SchemaError(f"unknown policy {policy!r}")
        report[policy] = {
            "failure_rate": float((errs > FAILURE_THRESHOLD).mean() * 100.0),
            "mean_error": float(errs.mean()),
            "fallbacks": fallbacks,
            "errors": errs,
        }
    return report


# ---------------------------------------------------------------------------
# Table emitters
# ---------------------------------------------------------------------------


def write_table_csv(rows: list, path: str) -> None:
    rows = [r.as_dict() if hasattr(r, "as_dict") else dict(r) for r in rows]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def write_table_json(rows: list, path: str) -> None:
    rows = [r.as_dict() if hasattr(r, "as_dict") else dict(r) for r in rows]
    with open(path, "w") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")
