"""The three training losses and how they behave as K grows.

With one class per training example (K = M), one-hot cross-entropy assigns
contradictory targets to near-duplicate images and degrades; spreading the
target over the membership set (soft target) dilutes the learning signal;
independent per-class logistic losses (multi-label) keep a full-strength
gradient for every membership and keep improving with K.

This is the desk-scale version of the loss-vs-K study; expect a few minutes.
"""

import numpy as np

from posealign import SyntheticConfig, generate_synthetic, multi_label_loss, soft_target_loss, softmax_loss
from posealign.classifier import TrainConfig
from posealign.data import flip_augment, split_and_subsample
from posealign.evaluation import default_tau_grid, loss_scaling_experiment, write_table_csv
from posealign.features import RandomProjectionExtractor
from posealign.shapes import normalize_shape

# ---- the losses on one toy score vector --------------------------------
s = np.array([2.0, 0.5, -1.0, 0.0])
members = [0, 1]
for name, (loss, grad) in {
    "softmax(c=0)": softmax_loss(s, 0),
    "soft_target": soft_target_loss(s, members),
    "multi_label": multi_label_loss(s, members),
}.items():
    print(f"{name:14s} loss={loss:.4f} grad={np.round(grad, 3)}")
print("note: the multi-label gradient on class 0 ignores how many other "
      "classes share the example\n")

# ---- the scaling experiment ---------------------------------------------
data = generate_synthetic(
    SyntheticConfig(n_examples=0, n_videos=24, frames_per_video=50, seed=42, noise_level=0.15)
)
train_ds, val_ds = split_and_subsample(data, 0.167, 1, seed=0)
train_ds = flip_augment(train_ds)
m = len(train_ds)
shapes = [normalize_shape(r.annotation) for r in train_ds.records]
tau = default_tau_grid(shapes, quantiles=(0.02, 0.05, 0.10))[2]
print(f"train {m} exemplars (after flip), val {len(val_ds)}, tau={tau:.3f}")

extractor = RandomProjectionExtractor(input_size=48, dim=32, seed=0)
config = TrainConfig(learning_rate=0.5, epochs=20, batch_size=64, seed=0)
cells = loss_scaling_experiment(
    train_ds, val_ds, extractor, [10, 100, m],
    ["softmax", "soft_target", "multi_label"], config, tau,
)

print(f"\n{'K':>6} {'loss':>12} {'val lmk':>8} {'train lmk':>9} {'val ml-err':>10}")
for c in cells:
    print(f"{c.k:>6} {c.loss:>12} {c.val_error:>8.4f} {c.train_error:>9.4f} {c.val_ml_error:>10.3f}")

write_table_csv(cells, "/tmp/posealign_loss_scaling.csv")
print("\ntable written to /tmp/posealign_loss_scaling.csv")
sm = {c.k: c.val_error for c in cells if c.loss == "softmax"}
ml = {c.k: c.val_error for c in cells if c.loss == "multi_label"}
print(f"softmax at K=M is {sm[m] / sm[100]:.2f}x its K=100 error; "
      f"multi-label at K=M is {ml[m] / sm[m]:.2f}x softmax at K=M")
