import numpy as np
import pytest

from posealign.classifier import TrainConfig, scores_batch, train
from posealign.clustering import build_pose_classes, membership_sets
from posealign.data import flip_augment, split_and_subsample
from posealign.evaluation import default_tau_grid
from posealign.features import RandomProjectionExtractor, TrainableMlpExtractor
from posealign.inference import marginal_global, posterior_from_scores
from posealign.model import extract_features
from posealign.shapes import normalize_shape, roll_proxy, width_asymmetry
from posealign.synthetic import SyntheticConfig, generate_synthetic


@pytest.fixture(scope="module")
def trained_setup():
    # stills, so the validation split samples the full yaw/roll ranges and
    # the proxies are not confounded by a single video's narrow trajectory
    from posealign.data import Dataset

    data = generate_synthetic(SyntheticConfig(n_examples=400, seed=15, noise_level=0.1))
    train_ds = flip_augment(Dataset(data.records[:320], data.schema))
    val_ds = Dataset(data.records[320:], data.schema)
    shapes = [normalize_shape(r.annotation) for r in train_ds.records]
    tau = default_tau_grid(shapes)[2]
    extractor = RandomProjectionExtractor(input_size=48, dim=32, seed=0)
    classes, assignments = build_pose_classes(shapes, len(shapes), seed=0)
    ms = membership_sets(classes, shapes, tau)
    features = extract_features(extractor, train_ds.records)
    head = train(train_ds, extractor, classes, ms, TrainConfig(epochs=15, seed=0),
                 features=features, assignments=assignments)
    return data, train_ds, val_ds, extractor, classes, head


def _histogram_mean(edges, masses):
    mids = (edges[:-1] + edges[1:]) / 2
    return float((mids * masses).sum())


def test_yaw_proxy_histogram_tracks_true_yaw(trained_setup):
    data, _, val_ds, extractor, classes, head = trained_setup
    f_val = extract_features(extractor, val_ds.records)
    scores = scores_batch(head, f_val)
    means, true_yaws = [], []
    for row, rec in zip(scores, val_ds.records):
        p = posterior_from_scores(row)
        edges, masses = marginal_global(p, classes, width_asymmetry, n_bins=24)
        means.append(_histogram_mean(edges, masses))
        true_yaws.append(rec.meta["yaw"])
    r = np.corrcoef(means, true_yaws)[0, 1]
    assert r > 0.8


def test_roll_proxy_histogram_tracks_true_roll(trained_setup):
    data, _, val_ds, extractor, classes, head = trained_setup
    roles = data.schema.landmark_roles
    stat = roll_proxy(roles["left_eye"], roles["right_eye"])
    f_val = extract_features(extractor, val_ds.records)
    scores = scores_batch(head, f_val)
    means, true_rolls = [], []
    for row, rec in zip(scores, val_ds.records):
        p = posterior_from_scores(row)
        edges, masses = marginal_global(p, classes, stat, n_bins=24)
        means.append(_histogram_mean(edges, masses))
        true_rolls.append(rec.meta["roll"])
    r = np.corrcoef(means, true_rolls)[0, 1]
    assert r > 0.8


def test_joint_extractor_training_reduces_loss():
    data = generate_synthetic(SyntheticConfig(n_examples=60, seed=9, noise_level=0.1))
    shapes = [normalize_shape(r.annotation) for r in data.records]
    classes, assignments = build_pose_classes(shapes, 12, seed=0)
    ms = membership_sets(classes, shapes, tau=0.25)
    extractor = TrainableMlpExtractor(input_size=32, hidden=48, dim=24, seed=0)
    history = []
    cfg = TrainConfig(loss="multi_label", learning_rate=0.3, epochs=8, batch_size=16,
                      seed=0, train_extractor=True, extractor_lr=0.02)
    head = train(data, extractor, classes, ms, cfg,
                 assignments=assignments, history_out=history)
    assert history[-1]["loss"] < history[0]["loss"]
    assert np.isfinite(head.weights).all()
    # the extractor parameters actually moved
    fresh = TrainableMlpExtractor(input_size=32, hidden=48, dim=24, seed=0)
    assert not np.allclose(extractor.w1, fresh.w1)
