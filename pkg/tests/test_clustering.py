import itertools

import numpy as np
import pytest

from posealign.clustering import (
    assign_classes,
    build_pose_classes,
    fit_bandwidths,
    kmeans_shapes,
    membership_histogram,
    membership_sets,
)
from posealign.errors import ConfigurationError
from posealign.shapes import SIGMA_FLOOR, Shape, normalize_shape
from posealign.synthetic import SyntheticConfig, generate_synthetic


def _points(xs):
    return [Shape(np.array([[x, 0.0]])) for x in xs]


def brute_force_two_clusters(xs):
    """Exhaustive search over all 2-partitions minimizing within-cluster SSE."""
    xs = np.asarray(xs, dtype=float)
    best = None
    for assign in itertools.product([0, 1], repeat=len(xs)):
        assign = np.array(assign)
        if assign.min() == assign.max():
            continue
        sse = sum(((xs[assign == j] - xs[assign == j].mean()) ** 2).sum() for j in (0, 1))
        if best is None or sse < best[0]:
            centers = sorted(xs[assign == j].mean() for j in (0, 1))
            best = (sse, centers)
    return best[1]


def test_kmeans_matches_exhaustive_two_cluster_oracle():
    xs = [0.0, 1.0, 10.0, 11.0]
    expected = brute_force_two_clusters(xs)  # [0.5, 10.5]
    assert expected == [0.5, 10.5]
    classes = kmeans_shapes(_points(xs), 2, seed=0)
    got = sorted(classes.centers[:, 0, 0])
    np.testing.assert_allclose(got, expected, atol=1e-9)


def test_exemplar_bypass_preserves_order():
    shapes = _points([3.0, -1.0, 2.0, 7.0])
    classes = kmeans_shapes(shapes, 4, seed=0)
    assert classes.exemplar
    np.testing.assert_array_equal(classes.centers[:, 0, 0], [3.0, -1.0, 2.0, 7.0])


def test_k1_returns_mean():
    shapes = _points([0.0, 1.0, 5.0])
    classes = kmeans_shapes(shapes, 1, seed=0)
    assert classes.centers[0, 0, 0] == pytest.approx(2.0)


def test_k_larger_than_m_rejected():
    with pytest.raises(ConfigurationError):
        kmeans_shapes(_points([0.0, 1.0]), 3, seed=0)


def test_duplicate_points_still_yield_k_centers():
    shapes = _points([0.0, 0.0, 0.0, 0.0, 9.0])
    classes = kmeans_shapes(shapes, 3, seed=1)
    assert classes.k == 3
    assert np.isfinite(classes.centers).all()


def test_sse_monotone_nonincreasing():
    rng = np.random.default_rng(8)
    shapes = [Shape(rng.normal(size=(4, 2))) for _ in range(120)]
    log = []
    kmeans_shapes(shapes, 8, seed=2, sse_log=log)
    assert len(log) >= 1
    assert all(b <= a + 1e-9 for a, b in zip(log, log[1:]))


def test_kmeans_deterministic_by_seed():
    rng = np.random.default_rng(0)
    shapes = [Shape(rng.normal(size=(3, 2))) for _ in range(50)]
    a = kmeans_shapes(shapes, 5, seed=4)
    b = kmeans_shapes(shapes, 5, seed=4)
    np.testing.assert_array_equal(a.centers, b.centers)


def test_fit_bandwidths_rms_and_floor():
    centers = kmeans_shapes(_points([0.0]), 1, seed=0)
    # two members both at distance 1
    shapes = _points([-1.0, 1.0])
    fitted = fit_bandwidths(centers, shapes, np.array([0, 0]))
    assert fitted.bandwidths[0] == pytest.approx(1.0)
    # members at distances 3 and 4 -> sqrt(12.5)
    fitted = fit_bandwidths(centers, _points([3.0, -4.0]), np.array([0, 0]))
    assert fitted.bandwidths[0] == pytest.approx(np.sqrt(12.5))
    # exemplar: single member at distance zero hits the floor
    fitted = fit_bandwidths(centers, _points([0.0]), np.array([0]))
    assert fitted.bandwidths[0] == SIGMA_FLOOR


def test_membership_basic_threshold():
    classes = kmeans_shapes(_points([0.0, 1.0, 3.0]), 3, seed=0)
    ms = membership_sets(classes, _points([0.4]), tau=1.0)
    np.testing.assert_array_equal(ms.sets[0], [0, 1])


def test_membership_tau_zero_exemplar_self():
    shapes = _points([0.0, 1.0, 2.0])
    classes = kmeans_shapes(shapes, 3, seed=0)
    ms = membership_sets(classes, shapes, tau=0.0)
    for i in range(3):
        np.testing.assert_array_equal(ms.sets[i], [i])


def test_membership_saturates_at_diameter():
    shapes = _points([0.0, 1.0, 2.0])
    classes = kmeans_shapes(shapes, 3, seed=0)
    ms = membership_sets(classes, shapes, tau=100.0)
    for i in range(3):
        np.testing.assert_array_equal(ms.sets[i], [0, 1, 2])


def test_membership_tau_monotone_and_nonempty():
    rng = np.random.default_rng(3)
    shapes = [Shape(rng.normal(size=(3, 2))) for _ in range(40)]
    classes = kmeans_shapes(shapes, 10, seed=0)
    taus = [0.0, 0.5, 1.0, 2.0, 5.0]
    sets_by_tau = [membership_sets(classes, shapes, t) for t in taus]
    for ms in sets_by_tau:
        assert all(len(s) >= 1 for s in ms.sets)
    for a, b in zip(sets_by_tau, sets_by_tau[1:]):
        for sa, sb in zip(a.sets, b.sets):
            assert set(sa) <= set(sb)


def test_membership_inverse_consistency():
    rng = np.random.default_rng(4)
    shapes = [Shape(rng.normal(size=(3, 2))) for _ in range(30)]
    classes = kmeans_shapes(shapes, 6, seed=0)
    ms = membership_sets(classes, shapes, tau=1.0)
    for i, s in enumerate(ms.sets):
        for k in s:
            assert i in ms.inverse[k]
    for k, members in enumerate(ms.inverse):
        for i in members:
            assert k in ms.sets[i]


def test_histogram_totals_and_degenerate_cases():
    shapes = _points([0.0] * 7)
    classes = kmeans_shapes(shapes, 7, seed=0)
    hist = membership_histogram(membership_sets(classes, shapes, tau=0.5))
    assert hist.sum() == 7
    assert hist[7] == 7  # identical shapes: every set is all classes

    distinct = _points([0.0, 1.0, 2.0])
    classes = kmeans_shapes(distinct, 3, seed=0)
    hist = membership_histogram(membership_sets(classes, distinct, tau=0.0))
    assert hist[1] == 3


def test_frontal_shapes_have_largest_memberships():
    data = generate_synthetic(SyntheticConfig(n_examples=300, seed=6))
    shapes = [normalize_shape(r.annotation) for r in data.records]
    classes, _ = build_pose_classes(shapes, len(shapes), seed=0)
    ms = membership_sets(classes, shapes, tau=0.08 * np.sqrt(data.schema.n_points))
    sizes = ms.sizes()
    yaw_mag = np.abs([r.meta["yaw"] for r in data.records])
    decile = len(sizes) // 10
    top = np.argsort(-sizes)[:decile]
    bottom = np.argsort(sizes)[:decile]
    assert yaw_mag[top].mean() < yaw_mag[bottom].mean()


def test_assign_classes_nearest():
    classes = kmeans_shapes(_points([0.0, 10.0]), 2, seed=0)
    idx = assign_classes(classes, _points([1.0, 9.0]))
    np.testing.assert_array_equal(sorted(idx), [0, 1])
