import numpy as np
import pytest

from posealign.errors import ConfigurationError, InvalidAnnotationError, SchemaError
from posealign.shapes import (
    BBox,
    FlipPermutation,
    RawAnnotation,
    Shape,
    denormalize_shape,
    flip_shape,
    normalize_shape,
    shape_distance,
    width_asymmetry,
)


def test_normalize_direct_arithmetic():
    raw = RawAnnotation(np.array([[0.0, 0.0], [3.0, 4.0]]), BBox(0, 0, 3, 4))
    shape = normalize_shape(raw)
    np.testing.assert_allclose(shape.points, [[-0.3, -0.4], [0.3, 0.4]], atol=1e-12)


def test_normalize_points_at_center():
    raw = RawAnnotation(np.array([[1.5, 2.0], [1.5, 2.0]]), BBox(0, 0, 3, 4))
    np.testing.assert_allclose(normalize_shape(raw).points, 0.0, atol=1e-12)


def test_normalize_translation_scale_invariance():
    rng = np.random.default_rng(3)
    for _ in range(50):
        pts = rng.uniform(0, 10, (7, 2))
        bbox = BBox(-1.0, -2.0, 12.0, 13.0)
        base = normalize_shape(RawAnnotation(pts, bbox))
        t = rng.uniform(-100, 100, 2)
        s = rng.uniform(0.1, 50)
        moved = RawAnnotation(
            pts * s + t, BBox(bbox.x * s + t[0], bbox.y * s + t[1], bbox.w * s, bbox.h * s)
        )
        np.testing.assert_allclose(normalize_shape(moved).points, base.points, atol=1e-9)


def test_normalize_rejects_non_finite():
    raw = RawAnnotation(np.array([[0.0, 0.0], [3.0, 4.0]]), BBox(0, 0, 3, 4))
    bad = RawAnnotation(np.array([[0.0, 0.0], [3.0, 4.0]]), BBox(0, 0, 3, 4))
    object.__setattr__(bad, "points", np.array([[np.nan, 0.0], [3.0, 4.0]]))
    with pytest.raises(InvalidAnnotationError):
        normalize_shape(bad)
    assert normalize_shape(raw)  # control


def test_bbox_validation():
    with pytest.raises(InvalidAnnotationError):
        BBox(0, 0, 0, 4)
    with pytest.raises(InvalidAnnotationError):
        BBox(0, 0, 3, -1)
    assert BBox(0, 0, 3, 4).diagonal == 5.0


def test_denormalize_round_trip():
    rng = np.random.default_rng(11)
    for _ in range(30):
        pts = rng.uniform(0, 64, (9, 2))
        bbox = BBox(5.0, 7.0, 30.0, 20.0)
        raw = RawAnnotation(pts, bbox)
        back = denormalize_shape(normalize_shape(raw), bbox)
        np.testing.assert_allclose(back, pts, atol=1e-9)


def test_denormalize_direct_cases():
    bbox = BBox(0, 0, 3, 4)
    zeros = Shape(np.zeros((2, 2)))
    np.testing.assert_allclose(denormalize_shape(zeros, bbox), [[1.5, 2.0], [1.5, 2.0]])
    one = Shape(np.array([[0.3, 0.4]]))
    np.testing.assert_allclose(denormalize_shape(one, bbox), [[3.0, 4.0]], atol=1e-12)


def test_shape_distance_basics():
    a = Shape(np.array([[0.0, 0.0]]))
    b = Shape(np.array([[3.0, 4.0]]))
    assert shape_distance(a, a) == 0.0
    assert shape_distance(a, b) == pytest.approx(5.0)
    assert shape_distance(b, a) == pytest.approx(5.0)
    with pytest.raises(SchemaError):
        shape_distance(a, Shape(np.zeros((2, 2))))


def test_shape_distance_is_a_metric():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        a, b, c = (Shape(rng.normal(size=(4, 2))) for _ in range(3))
        dab, dbc, dac = shape_distance(a, b), shape_distance(b, c), shape_distance(a, c)
        assert dac <= dab + dbc + 1e-12
        assert dab >= 0


def test_flip_is_involution():
    rng = np.random.default_rng(9)
    perm = FlipPermutation(np.array([1, 0, 2]))
    for _ in range(20):
        s = Shape(rng.normal(size=(3, 2)))
        back = flip_shape(flip_shape(s, perm), perm)
        np.testing.assert_allclose(back.points, s.points, atol=1e-12)


def test_flip_symmetric_fixed_point():
    s = Shape(np.array([[-1.0, 0.5], [1.0, 0.5], [0.0, -0.2]]))
    perm = FlipPermutation(np.array([1, 0, 2]))
    flipped = flip_shape(s, perm)
    np.testing.assert_allclose(flipped.points, s.points, atol=1e-12)


def test_flip_two_landmark_example():
    s = Shape(np.array([[-1.0, 0.0], [1.0, 0.0]]))
    perm = FlipPermutation(np.array([1, 0]))
    flipped = flip_shape(s, perm)
    np.testing.assert_allclose(flipped.points[0], [-1.0, 0.0])
    np.testing.assert_allclose(flipped.points[1], [1.0, 0.0])


def test_flip_perm_must_be_involution():
    with pytest.raises(ConfigurationError):
        FlipPermutation(np.array([1, 2, 0]))


def test_width_asymmetry_signs():
    assert width_asymmetry(Shape(np.array([[-1.0, 0], [1.0, 0]]))) == pytest.approx(0.0)
    skew = Shape(np.array([[-1.0, 0], [0.0, 0], [0.2, 0], [3.0, 0]]))
    assert width_asymmetry(skew) > 0
