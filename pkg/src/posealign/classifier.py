"""The K-way classifier head: scoring, training losses, SGD training.

Three losses share the scoring path but differ in targets:

* ``softmax``: cross-entropy against the one-hot nearest class,
* ``soft_target``: cross-entropy against a target spread uniformly over the
  example's membership set,
* ``multi_label``: K independent logistic problems with +1 labels on the
  membership set, so the per-class gradient magnitude does not shrink as
  membership sets grow.

All gradients are analytic; test-time class probabilities always come from
a softmax over scores, whatever the training loss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .clustering import MembershipSets, PoseClassSet
from .errors import ConfigurationError, SchemaError, TrainingDivergedError, ZeroVectorError
from .features import FeatureExtractor, TrainableMlpExtractor

logger = logging.getLogger(__name__)

LOSS_KINDS = ("softmax", "soft_target", "multi_label")


@dataclass(frozen=True, eq=False)
class ClassifierHead:
    """K x D weight matrix plus bias; rows are per-class score templates."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2:
            raise SchemaError(f"expected (K, D) weights, got {w.shape}")
        if b.shape != (w.shape[0],):
            raise SchemaError(f"bias shape {b.shape} does not match K={w.shape[0]}")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise SchemaError("non-finite head parameters")
        w = w.copy()
        b = b.copy()
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def param_count(self) -> int:
        return self.k * (self.dim + 1)


def scores(head: ClassifierHead, feature: np.ndarray) -> np.ndarray:
    """s = W f + b for a single feature vector."""
    f = np.asarray(feature, dtype=np.float64)
    if f.shape != (head.dim,):
        raise SchemaError(f"feature shape {f.shape} does not match D={head.dim}")
    return head.weights @ f + head.bias


def scores_batch(head: ClassifierHead, features: np.ndarray) -> np.ndarray:
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[1] != head.dim:
        raise SchemaError(f"features shape {f.shape} does not match D={head.dim}")
    return f @ head.weights.T + head.bias


def log_softmax(s: np.ndarray) -> np.ndarray:
    shifted = s - s.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(s: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(s))


def softmax_loss(s: np.ndarray, c: int) -> tuple[float, np.ndarray]:
    """Cross-entropy against the one-hot class c; grad = p - onehot(c)."""
    s = np.asarray(s, dtype=np.float64)
    if not 0 <= c < s.shape[0]:
        raise SchemaError(f"class index {c} out of range for K={s.shape[0]}")
    logp = log_softmax(s)
    grad = np.exp(logp)
    grad[c] -= 1.0
    return -float(logp[c]), grad


def soft_target_loss(s: np.ndarray, members) -> tuple[float, np.ndarray]:
    """Cross-entropy against mass spread uniformly over the membership set."""
    s = np.asarray(s, dtype=np.float64)
    members = np.asarray(members, dtype=np.int64)
    if members.size == 0:
        raise ValueError("membership set must be nonempty")
    logp = log_softmax(s)
    q = np.zeros_like(s)
    q[members] = 1.0 / members.size
    return -float((q * logp).sum()), np.exp(logp) - q


def multi_label_loss(s: np.ndarray, members) -> tuple[float, np.ndarray]:
    """Sum of independent logistic losses with +1 labels on the set.

    loss = sum_k softplus(-c_k s_k), c_k = +1 inside the set else -1;
    grad_k = sigmoid(s_k) - [k in set].
    """
    s = np.asarray(s, dtype=np.float64)
    members = np.asarray(members, dtype=np.int64)
    if members.size == 0:
        raise ValueError("membership set must be nonempty")
    y = np.zeros_like(s)
    y[members] = 1.0
    c = 2.0 * y - 1.0
    loss = float(np.logaddexp(0.0, -c * s).sum())
    sigma = 1.0 / (1.0 + np.exp(-np.clip(s, -500, 500)))
    return loss, sigma - y


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "multi_label"
    learning_rate: float = 0.5
    lr_decay: float = 1.0  # multiplicative per-epoch factor
    epochs: int = 20
    batch_size: int = 64
    weight_decay: float = 0.0
    seed: int = 0
    train_bias: bool = False
    train_extractor: bool = False
    extractor_lr: float = 0.01

    def __post_init__(self):
        if self.loss not in LOSS_KINDS:
            raise ConfigurationError(f"unknown loss {self.loss!r}, use one of {LOSS_KINDS}")
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("learning rate, epochs, and batch size must be positive")


def _batch_targets(kind, k, batch_idx, assignments, memberships):
    """Dense (B, K) soft target q (cross-entropy) or 0/1 labels (multi-label)."""
    b = len(batch_idx)
    q = np.zeros((b, k))
    if kind == "softmax":
        q[np.arange(b), assignments[batch_idx]] = 1.0
    else:
        for row, i in enumerate(batch_idx):
            mem = memberships.sets[i]
            q[row, mem] = 1.0 if kind == "multi_label" else 1.0 / len(mem)
    return q


def _batch_loss_grad(kind, s, q):
    if kind == "multi_label":
        c = 2.0 * q - 1.0
        loss = np.logaddexp(0.0, -c * s).sum(axis=1).mean()
        sigma = 1.0 / (1.0 + np.exp(-np.clip(s, -500, 500)))
        return float(loss), sigma - q
    logp = log_softmax(s)
    loss = -(q * logp).sum(axis=1).mean()
    return float(loss), np.exp(logp) - q


def train(
    dataset,
    extractor: FeatureExtractor,
    classes: PoseClassSet,
    memberships: MembershipSets,
    config: TrainConfig,
    features: np.ndarray | None = None,
    assignments: np.ndarray | None = None,
    history_out: list | None = None,
) -> ClassifierHead:
    """Mini-batch SGD over the head (and optionally the extractor).

    ``dataset`` may be a Dataset or a plain list of records; ``features``
    short-circuits extraction when the caller already has them.  Training is
    deterministic given the config seed.  Per-epoch mean loss and multi-label
    error are logged and, if ``history_out`` is given, appended to it.
    """
    from .model import extract_features  # local import to avoid a cycle

    records = dataset.records if hasattr(dataset, "records") else dataset
    joint = config.train_extractor and isinstance(extractor, TrainableMlpExtractor)
    crops = None
    if joint:
        crops = extract_features(extractor, records, return_crops=True)
    elif features is None:
        features = extract_features(extractor, records)

    m = len(records)
    k = classes.k
    if memberships.n_examples != m or memberships.n_classes != k:
        raise SchemaError(
            f"memberships cover {memberships.n_examples} examples / "
            f"{memberships.n_classes} classes, expected {m} / {k}"
        )
    if assignments is None:
        assignments = np.array([s[0] for s in memberships.sets])
        if config.loss == "softmax":
            from .clustering import assign_classes
            from .shapes import normalize_shape

            assignments = assign_classes(classes, [normalize_shape(r.annotation) for r in records])

    w = np.zeros((k, extractor.dim))
    b = np.zeros(k)
    rng = np.random.default_rng(config.seed)
    lr = config.learning_rate

    for epoch in range(config.epochs):
        order = rng.permutation(m)
        total_loss = 0.0
        wrong = 0
        for start in range(0, m, config.batch_size):
            idx = order[start : start + config.batch_size]
            if joint:
                f = extractor.forward_batch(crops[idx])
            else:
                f = features[idx]
            s = f @ w.T + b
            q = _batch_targets(config.loss, k, idx, assignments, memberships)
            loss, grad_s = _batch_loss_grad(config.loss, s, q)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, start // config.batch_size)
            total_loss += loss * len(idx)

            pred = s.argmax(1)
            for row, i in enumerate(idx):
                if not np.isin(pred[row], memberships.sets[i]):
                    wrong += 1

            gw = grad_s.T @ f / len(idx)
            if config.weight_decay:
                gw += config.weight_decay * w
            if joint:
                grads = extractor.backward(grad_s @ w / len(idx))
                extractor.sgd_step(grads, lr * config.extractor_lr / config.learning_rate)
            w -= lr * gw
            if config.train_bias:
                b -= lr * grad_s.mean(0)

        epoch_loss = total_loss / m
        ml_err = wrong / m
        logger.info("epoch %d: loss %.5f, multi-label error %.4f", epoch, epoch_loss, ml_err)
        if history_out is not None:
            history_out.append({"epoch": epoch, "loss": epoch_loss, "multi_label_error": ml_err})
        lr *= config.lr_decay

    return ClassifierHead(weights=w, bias=b)


def embed(head: ClassifierHead, mode: str, item, extractor: FeatureExtractor | None = None) -> np.ndarray:
    """Class-weight row (mode 'weights') or extractor output (mode 'features')."""
    if mode == "weights":
        k = int(item)
        if not 0 <= k < head.k:
            raise SchemaError(f"class index {k} out of range for K={head.k}")
        return head.weights[k].copy()
    if mode == "features":
        if extractor is None:
            raise ConfigurationError("mode='features' requires an extractor")
        return extractor.extract(item)
    raise ConfigurationError(f"unknown embed mode {mode!r}")


def nn_classify(bank: np.ndarray, query: np.ndarray) -> int:
    """Index of the bank vector with the highest cosine similarity."""
    bank = np.asarray(bank, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    if bank.ndim != 2 or bank.shape[0] < 1:
        raise SchemaError(f"expected nonempty (n, D) bank, got {bank.shape}")
    norms = np.linalg.norm(bank, axis=1)
    qn = np.linalg.norm(query)
    if qn == 0 or np.any(norms == 0):
        raise ZeroVectorError("cosine similarity undefined for zero vectors")
    sims = bank @ query / (norms * qn)
    return int(sims.argmax())
