"""Pre- and post-processing regression around the classifier.

Detection refinement: a ridge regressor maps window features to box deltas,
fixing sloppy detector output before classification.  Pose-class cascades:
grouped linear regressors walk from the predicted class prototype toward the
true landmarks using local pixel samples, sharing member examples exactly
like the losses do.
"""

import numpy as np

from posealign import SyntheticConfig, build_pose_classes, generate_synthetic, membership_sets
from posealign.classifier import TrainConfig, train
from posealign.data import Dataset, flip_augment
from posealign.evaluation import ced_stats, default_tau_grid, evaluate_model
from posealign.features import RandomProjectionExtractor
from posealign.model import build_model, extract_features
from posealign.refine import perturb_detections, refine_bbox, train_bbox_regressor, train_pose_regressors
from posealign.shapes import normalize_shape

data = generate_synthetic(SyntheticConfig(n_examples=500, seed=13, noise_level=0.12))
split = 400
train_ds = flip_augment(Dataset(data.records[:split], data.schema))
test_ds = Dataset(data.records[split:], data.schema)
extractor = RandomProjectionExtractor(input_size=48, dim=32, seed=0)

# ---- detection refinement ------------------------------------------------
dets_train = perturb_detections(train_ds, seed=1)
dets_test = perturb_detections(test_ds, seed=2)
reg = train_bbox_regressor(train_ds, dets_train, extractor, lam=1.0)
before, after = [], []
for rec, det in zip(test_ds.records, dets_test):
    gt = rec.annotation.bbox
    refined = refine_bbox(reg, extractor, rec.image, det)
    before.append(np.linalg.norm(det.center - gt.center) / gt.diagonal)
    after.append(np.linalg.norm(refined.center - gt.center) / gt.diagonal)
print(f"detection centers, normalized error: {np.mean(before):.4f} -> {np.mean(after):.4f} "
      f"after one-shot refinement")

# ---- pose-class cascades ---------------------------------------------------
shapes = [normalize_shape(r.annotation) for r in train_ds.records]
tau = default_tau_grid(shapes)[2]
classes, assignments = build_pose_classes(shapes, len(shapes), seed=0)
ms = membership_sets(classes, shapes, tau)
features = extract_features(extractor, train_ds.records)
head = train(train_ds, extractor, classes, ms, TrainConfig(epochs=15, seed=0),
             features=features, assignments=assignments)

levels = []
cascade = train_pose_regressors(train_ds, classes, ms, n_groups=20, n_levels=5,
                                seed=0, max_instances_per_group=500,
                                level_errors_out=levels)
print(f"\ncascade training error per level: {['%.4f' % e for e in levels]}")

model = build_model(train_ds, extractor, classes, head, tau, cascade=cascade)
err_cls = evaluate_model(model, test_ds, use_cascade=False)
err_reg = evaluate_model(model, test_ds, use_cascade=True)
print(f"\ntest error: classification {err_cls.mean():.4f} "
      f"(FR {ced_stats(err_cls).failure_rate:.1f}%) -> "
      f"+cascade {err_reg.mean():.4f} (FR {ced_stats(err_reg).failure_rate:.1f}%)")
print("coarse classification nails the pose; the cascade fixes fine-scale error")
