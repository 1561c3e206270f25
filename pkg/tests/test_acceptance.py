"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  The heavier criteria share one synthetic regime (2,000 exemplars
after flip augmentation) built once per session.
"""

import itertools
import time

import numpy as np
import pytest

from posealign.bench import bench_head_scaling, head_flops
from posealign.classifier import (
    TrainConfig,
    multi_label_loss,
    nn_classify,
    scores_batch,
    soft_target_loss,
    softmax_loss,
    train,
)
from posealign.clustering import (
    PoseClassSet,
    build_pose_classes,
    kmeans_shapes,
    membership_sets,
)
from posealign.data import apply_occlusion, flip_augment, split_and_subsample
from posealign.errors import InfeasiblePathError
from posealign.evaluation import (
    canonical_errors,
    ced_stats,
    default_tau_grid,
    evaluate_model,
    interactive_eval,
    loss_scaling_experiment,
    mean_shape_errors,
)
from posealign.features import RandomProjectionExtractor
from posealign.inference import Evidence, PosePosterior, condition, mixture, predict_landmarks
from posealign.model import build_model, extract_features
from posealign.pts import parse_pts, serialize_pts
from posealign.refine import train_pose_regressors
from posealign.shapes import Shape, normalize_shape
from posealign.synthetic import SyntheticConfig, generate_synthetic
from posealign.temporal import FrameSequence, TransitionStructure, path_score, viterbi


def report(number, ok, detail):
    print(f"\nCRITERION {number:>2} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


# ---------------------------------------------------------------------------
# Shared desk-scale regime: ~2,000 exemplars after flip
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def regime():
    cfg = SyntheticConfig(
        n_examples=0, n_videos=24, frames_per_video=50, seed=42, noise_level=0.15
    )
    data = generate_synthetic(cfg)
    train_ds, val_ds = split_and_subsample(data, 0.167, 1, seed=0)
    train_ds = flip_augment(train_ds)
    shapes = [normalize_shape(r.annotation) for r in train_ds.records]
    tau = default_tau_grid(shapes, quantiles=(0.02, 0.05, 0.10))[2]
    extractor = RandomProjectionExtractor(input_size=48, dim=32, seed=0)
    config = TrainConfig(loss="multi_label", learning_rate=0.5, epochs=20, batch_size=64, seed=0)
    return {
        "train": train_ds,
        "val": val_ds,
        "shapes": shapes,
        "tau": tau,
        "extractor": extractor,
        "config": config,
    }


@pytest.fixture(scope="session")
def exemplar_model(regime):
    train_ds = regime["train"]
    shapes = regime["shapes"]
    extractor = regime["extractor"]
    features = extract_features(extractor, train_ds.records)
    classes, assignments = build_pose_classes(shapes, len(shapes), seed=0)
    memberships = membership_sets(classes, shapes, regime["tau"])
    head = train(
        train_ds, extractor, classes, memberships, regime["config"],
        features=features, assignments=assignments,
    )
    model = build_model(train_ds, extractor, classes, head, regime["tau"])
    return {
        "model": model,
        "classes": classes,
        "memberships": memberships,
        "head": head,
        "features": features,
    }


# ---------------------------------------------------------------------------
# 1. Gradient exactness
# ---------------------------------------------------------------------------


def test_criterion_01_gradient_exactness():
    t0 = time.time()
    rng = np.random.default_rng(1)
    h = 1e-5
    worst = 0.0
    for loss_case in ("softmax", "soft_target", "multi_label"):
        for _ in range(100):
            k = int(rng.integers(2, 12))
            s = rng.normal(scale=2.0, size=k)
            c = int(rng.integers(k))
            members = np.flatnonzero(rng.random(k) < 0.4)
            if members.size == 0:
                members = np.array([c])
            if loss_case == "softmax":
                fn = lambda v: softmax_loss(v, c)
            elif loss_case == "soft_target":
                fn = lambda v: soft_target_loss(v, members)
            else:
                fn = lambda v: multi_label_loss(v, members)
            _, grad = fn(s)
            fd = np.empty(k)
            for i in range(k):
                up, down = s.copy(), s.copy()
                up[i] += h
                down[i] -= h
                fd[i] = (fn(up)[0] - fn(down)[0]) / (2 * h)
            rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12)
            worst = max(worst, rel)
    elapsed = time.time() - t0
    ok = worst < 1e-5 and elapsed < 5.0
    report(1, ok, f"all loss gradients match FD (worst rel err {worst:.2e}, {elapsed:.2f}s)")


# ---------------------------------------------------------------------------
# 2. Viterbi oracle equivalence
# ---------------------------------------------------------------------------


def test_criterion_02_viterbi_oracle():
    t0 = time.time()
    rng = np.random.default_rng(2)
    checked = 0
    for trial in range(100):
        k = int(rng.integers(2, 7))
        t = int(rng.integers(1, 7))
        if trial % 3 == 0:
            # exact ties via duplicated states: identical emission columns and
            # a uniform complete graph make tied paths float-for-float equal
            distinct = rng.random((t, max(1, k // 2))) + 1e-3
            cols = rng.integers(distinct.shape[1], size=k)
            probs = distinct[:, cols]
            neighbors = [
                np.array([b for b in range(k) if b != a], dtype=np.int64) for a in range(k)
            ]
            trans = TransitionStructure(neighbors, self_weight=1.0, neighbor_weight=1.0)
        else:
            probs = rng.random((t, k)) + 1e-3
            neighbors = [[] for _ in range(k)]
            for a in range(k):
                for b in range(a + 1, k):
                    if rng.random() < 0.55:
                        neighbors[a].append(b)
                        neighbors[b].append(a)
            trans = TransitionStructure(
                [np.array(sorted(n), dtype=np.int64) for n in neighbors],
                self_weight=float(rng.uniform(0.5, 2.0)),
                neighbor_weight=float(rng.uniform(0.5, 2.0)),
            )
        probs /= probs.sum(1, keepdims=True)
        seq = FrameSequence(probs)

        with np.errstate(divide="ignore"):
            logp = np.log(probs)
        mat = trans.log_matrix()
        best_path, best_score = None, -np.inf
        for path in itertools.product(range(k), repeat=t):
            p = np.array(path)
            score = logp[np.arange(t), p].sum()
            if t > 1:
                score += mat[p[:-1], p[1:]].sum()
            if score > best_score:
                best_path, best_score = p, score

        try:
            decoded = viterbi(seq, trans)
        except InfeasiblePathError:
            assert np.isneginf(best_score)
            continue
        assert np.array_equal(decoded, best_path), f"path mismatch on trial {trial}"
        assert path_score(seq, trans, decoded) == pytest.approx(best_score, abs=1e-12)
        checked += 1
    elapsed = time.time() - t0
    ok = checked >= 90 and elapsed < 5.0
    report(2, ok, f"viterbi == exhaustive enumeration on {checked} instances ({elapsed:.2f}s)")


# ---------------------------------------------------------------------------
# 3. Mixture correctness
# ---------------------------------------------------------------------------


def test_criterion_03_mixture_correctness():
    sigma = 0.05
    classes = PoseClassSet(
        centers=np.array([[[0.0, 0.0]], [[0.3, -0.1]]]), bandwidths=np.array([sigma, sigma])
    )
    p = PosePosterior(np.array([0.35, 0.65]))
    dist = mixture(p, classes)

    mu = dist.mean().ravel()
    half = 0.5 + 6 * sigma
    n = 501
    xs = np.linspace(mu[0] - half, mu[0] + half, n)
    ys = np.linspace(mu[1] - half, mu[1] + half, n)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    dens = dist.density(pts)
    cell = (xs[1] - xs[0]) * (ys[1] - ys[0])
    integral = dens.sum() * cell
    quad_mean = (pts * dens[:, None]).sum(0) * cell
    expectation = predict_landmarks(p, classes, "expectation").points.ravel()

    ev_all = Evidence(0, (0.15, 0.0), tolerance=10.0)
    identity = condition(p, classes, ev_all)
    ev = Evidence(0, (0.0, 0.0), tolerance=0.2)
    once = condition(p, classes, ev)
    twice = condition(once, classes, ev)

    ok = (
        abs(integral - 1.0) < 1e-3
        and np.abs(expectation - quad_mean).max() < 1e-3
        and np.array_equal(identity.probs, p.probs)
        and np.array_equal(once.probs, twice.probs)
    )
    report(
        3,
        ok,
        f"mixture integrates to {integral:.6f}, expectation matches quadrature "
        f"(max dev {np.abs(expectation - quad_mean).max():.2e}), conditioning "
        "identity and idempotence exact",
    )


# ---------------------------------------------------------------------------
# 4. Loss-vs-K direction
# ---------------------------------------------------------------------------


def test_criterion_04_loss_scaling_direction(regime):
    t0 = time.time()
    train_ds, val_ds = regime["train"], regime["val"]
    m = len(train_ds)
    assert 1900 <= m <= 2100, f"regime should give ~2000 exemplars, got {m}"
    cells = loss_scaling_experiment(
        train_ds, val_ds, regime["extractor"],
        [10, 100, 1000, m],
        ["softmax", "soft_target", "multi_label"],
        regime["config"], regime["tau"],
    )
    res = {(c.k, c.loss): c.val_error for c in cells}
    sm_100 = res[(100, "softmax")]
    sm_m = res[(m, "softmax")]
    ml_m = res[(m, "multi_label")]
    elapsed = time.time() - t0
    ok = ml_m <= 0.85 * sm_m and sm_m > sm_100 and elapsed < 1800
    report(
        4,
        ok,
        f"K={m}: multi-label {ml_m:.4f} vs softmax {sm_m:.4f} "
        f"(ratio {ml_m / sm_m:.2f} <= 0.85), softmax K=100 {sm_100:.4f} < K=M "
        f"({elapsed:.0f}s)",
    )


# ---------------------------------------------------------------------------
# 5. Head scaling bench
# ---------------------------------------------------------------------------


def test_criterion_05_head_scaling():
    dim = 64
    k_grid = [10, 100, 1000, 10000]
    rows = bench_head_scaling(
        dim, k_grid, extractor_flops=100.0 * head_flops(max(k_grid), dim), repeats=100
    )
    params_ok = all(r.param_scalars == r.k * (dim + 1) for r in rows)
    ks = np.array([r.k for r in rows])
    counts = np.array([r.param_scalars for r in rows])
    linear_ok = np.array_equal(counts, ks * (dim + 1))
    ratio = rows[-1].median_total_ms / rows[0].median_total_ms
    flops_ok = rows[0].extractor_flops >= 100.0 * head_flops(max(k_grid), dim)
    ok = params_ok and linear_ok and flops_ok and ratio <= 1.2
    report(
        5,
        ok,
        f"memory exactly K*(D+1) scalars; forward time ratio K={k_grid[-1]} vs "
        f"K=10 is {ratio:.3f} (<= 1.2) at {rows[0].extractor_flops / 1e6:.0f} MFLOP extractor",
    )


# ---------------------------------------------------------------------------
# 6. Interactive conditioning direction
# ---------------------------------------------------------------------------


def test_criterion_06_interactive_conditioning(regime, exemplar_model):
    occluded = apply_occlusion(regime["val"], 0.35, seed=1)
    rep = interactive_eval(occluded, exemplar_model["model"])
    fr_none = rep["none"]["failure_rate"]
    fr_1pt = rep["fixed_point"]["failure_rate"]
    fr_best = rep["best_point"]["failure_rate"]
    ok = fr_best <= fr_1pt <= fr_none and fr_1pt <= 0.5 * fr_none and fr_none > 0
    report(
        6,
        ok,
        f"FR none {fr_none:.2f}% -> 1pt {fr_1pt:.2f}% -> best {fr_best:.2f}% "
        f"(1pt at most half of none)",
    )


# ---------------------------------------------------------------------------
# 7. Pipeline direction: classification vs cascade refinement
# ---------------------------------------------------------------------------


def test_criterion_07_pipeline_direction(regime, exemplar_model):
    levels = []
    cascade = train_pose_regressors(
        regime["train"], exemplar_model["classes"], exemplar_model["memberships"],
        n_groups=25, n_levels=5, lam=1.0, seed=0,
        max_instances_per_group=800, level_errors_out=levels,
    )
    monotone = all(b <= a + 1e-12 for a, b in zip(levels, levels[1:]))

    model = exemplar_model["model"]
    from dataclasses import replace

    model_with_cascade = replace(model, cascade=cascade)
    err_cls = evaluate_model(model_with_cascade, regime["val"], use_cascade=False)
    err_reg = evaluate_model(model_with_cascade, regime["val"], use_cascade=True)
    err_mean = mean_shape_errors(regime["train"], regime["val"])
    fr_cls = ced_stats(err_cls).failure_rate
    fr_mean = ced_stats(err_mean).failure_rate

    ok = monotone and err_cls.mean() >= err_reg.mean() and fr_cls <= fr_mean
    report(
        7,
        ok,
        f"classification {err_cls.mean():.4f} >= +regressor {err_reg.mean():.4f}; "
        f"cascade levels {['%.4f' % e for e in levels]} non-increasing; "
        f"FR classification {fr_cls:.1f}% <= FR mean-shape {fr_mean:.1f}%",
    )


# ---------------------------------------------------------------------------
# 8. Nearest-neighbor embedding comparison
# ---------------------------------------------------------------------------


def test_criterion_08_nn_embedding(regime, exemplar_model):
    head = exemplar_model["head"]
    classes = exemplar_model["classes"]
    f_train = exemplar_model["features"]
    f_val = extract_features(regime["extractor"], regime["val"].records)
    gts = np.stack([normalize_shape(r.annotation).points for r in regime["val"].records])

    pred_linear = scores_batch(head, f_val).argmax(1)
    err_linear = canonical_errors(classes.centers[pred_linear], gts).mean()

    pred_w = np.array([nn_classify(head.weights, q) for q in f_val])
    err_w = canonical_errors(classes.centers[pred_w], gts).mean()

    pred_f = np.array([nn_classify(f_train, q) for q in f_val])
    err_f = canonical_errors(classes.centers[pred_f], gts).mean()

    rel = abs(err_w - err_linear) / err_linear
    ok = rel <= 0.10 and err_w <= err_f
    report(
        8,
        ok,
        f"linear {err_linear:.4f}, NN(weights) {err_w:.4f} (rel diff {rel:.3f} <= 0.10), "
        f"NN(features) {err_f:.4f} (weights not worse)",
    )


# ---------------------------------------------------------------------------
# 9. Parser / generator / augmentation IO
# ---------------------------------------------------------------------------


def test_criterion_09_parser_and_io():
    rng = np.random.default_rng(9)
    round_trips = 0
    for _ in range(100):
        n = int(rng.integers(1, 30))
        pts = rng.uniform(-1e4, 1e4, (n, 2))
        doc = serialize_pts(pts)
        parsed = parse_pts(doc)
        again = serialize_pts(parsed)
        if np.array_equal(parsed, pts) and again == doc:
            round_trips += 1

    cfg = SyntheticConfig(n_examples=15, n_videos=1, frames_per_video=5, seed=77)
    d1, d2 = generate_synthetic(cfg), generate_synthetic(cfg)
    deterministic = all(
        np.array_equal(a.image, b.image)
        and np.array_equal(a.annotation.points, b.annotation.points)
        for a, b in zip(d1.records, d2.records)
    )
    doubled = flip_augment(d1)
    ok = round_trips == 100 and deterministic and len(doubled) == 2 * len(d1)
    report(
        9,
        ok,
        f".pts round-trips {round_trips}/100 bit-exact; generation bit-deterministic; "
        f"flip doubles {len(d1)} -> {len(doubled)}",
    )


# ---------------------------------------------------------------------------
# 10. Membership / clustering exact properties
# ---------------------------------------------------------------------------


def test_criterion_10_membership_clustering():
    rng = np.random.default_rng(10)
    shapes = [Shape(rng.normal(size=(4, 2))) for _ in range(80)]

    sse = []
    kmeans_shapes(shapes, 8, seed=0, sse_log=sse)
    sse_ok = all(b <= a + 1e-9 for a, b in zip(sse, sse[1:]))

    exemplar = kmeans_shapes(shapes, len(shapes), seed=0)
    bypass_ok = exemplar.exemplar and all(
        np.array_equal(exemplar.centers[i], shapes[i].points) for i in range(len(shapes))
    )

    classes = kmeans_shapes(shapes, 12, seed=0)
    taus = [0.0, 0.3, 0.8, 2.0, 6.0]
    sets_by_tau = [membership_sets(classes, shapes, t) for t in taus]
    nonempty_ok = all(all(len(s) >= 1 for s in ms.sets) for ms in sets_by_tau)
    monotone_ok = all(
        set(sa) <= set(sb)
        for a, b in zip(sets_by_tau, sets_by_tau[1:])
        for sa, sb in zip(a.sets, b.sets)
    )
    ok = sse_ok and bypass_ok and nonempty_ok and monotone_ok
    report(
        10,
        ok,
        "k-means SSE non-increasing, exemplar bypass identity, membership sets "
        "nonempty and tau-monotone",
    )
