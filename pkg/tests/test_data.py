import numpy as np
import pytest

from posealign.data import (
    Dataset,
    apply_occlusion,
    crop_window,
    flip_augment,
    load_dataset,
    sample_pixels,
    save_dataset,
    split_and_subsample,
)
from posealign.errors import SplitError
from posealign.shapes import BBox
from posealign.synthetic import SyntheticConfig, generate_synthetic


@pytest.fixture(scope="module")
def small_dataset():
    cfg = SyntheticConfig(n_examples=6, n_videos=3, frames_per_video=20, seed=5)
    return generate_synthetic(cfg)


def test_split_holds_out_whole_videos(small_dataset):
    train, val = split_and_subsample(small_dataset, 0.34, 2, seed=1)
    train_vids = {r.video_id for r in train.records if r.video_id}
    val_vids = {r.video_id for r in val.records if r.video_id}
    assert train_vids and val_vids
    assert not train_vids & val_vids
    # stills always stay in train
    assert sum(r.video_id is None for r in train.records) == 6
    assert all(r.video_id is not None for r in val.records)


def test_split_stride_takes_uniform_interval(small_dataset):
    train, _ = split_and_subsample(small_dataset, 0.34, 10, seed=1)
    for vid in {r.video_id for r in train.records if r.video_id}:
        idx = [r.frame_index for r in train.records if r.video_id == vid]
        assert idx == [0, 10]


def test_split_deterministic(small_dataset):
    a = split_and_subsample(small_dataset, 0.34, 2, seed=9)
    b = split_and_subsample(small_dataset, 0.34, 2, seed=9)
    assert [r.annotation.image_ref for r in a[0].records] == [
        r.annotation.image_ref for r in b[0].records
    ]


def test_split_needs_two_videos():
    cfg = SyntheticConfig(n_examples=4, n_videos=1, frames_per_video=5, seed=2)
    with pytest.raises(SplitError):
        split_and_subsample(generate_synthetic(cfg), 0.3, 1, seed=0)


def test_flip_augment_doubles_and_mirrors(small_dataset):
    doubled = flip_augment(small_dataset)
    assert len(doubled) == 2 * len(small_dataset)

    orig = small_dataset.records[0]
    flipped = next(
        r for r in doubled.records if r.annotation.image_ref == orig.annotation.image_ref + "~flip"
    )
    w = orig.image.shape[1]
    bb, fb = orig.annotation.bbox, flipped.annotation.bbox
    assert fb.x == pytest.approx(w - bb.x - bb.w)
    assert (fb.w, fb.h) == (bb.w, bb.h)
    np.testing.assert_array_equal(flipped.image, orig.image[:, ::-1])
    # landmarks stay inside the mirrored raster
    assert (flipped.annotation.points >= 0).all()
    assert (flipped.annotation.points[:, 0] <= w).all()


def test_double_flip_restores_originals(small_dataset):
    once = flip_augment(small_dataset)
    twice = flip_augment(once)
    orig = small_dataset.records[0]
    again = next(
        r
        for r in twice.records
        if r.annotation.image_ref == orig.annotation.image_ref + "~flip~flip"
    )
    np.testing.assert_array_equal(again.image, orig.image)
    np.testing.assert_allclose(again.annotation.points, orig.annotation.points, atol=1e-9)


def test_save_load_round_trip(tmp_path, small_dataset):
    save_dataset(small_dataset, str(tmp_path / "d"))
    loaded = load_dataset(str(tmp_path / "d"))
    assert len(loaded) == len(small_dataset)
    assert loaded.schema.n_points == small_dataset.schema.n_points
    for a, b in zip(small_dataset.records, loaded.records):
        np.testing.assert_array_equal(a.image, b.image)
        np.testing.assert_array_equal(a.annotation.points, b.annotation.points)
        assert a.video_id == b.video_id


def test_crop_window_identity_patch():
    img = np.arange(16, dtype=np.float32).reshape(4, 4) / 16.0
    crop = crop_window(img, BBox(0, 0, 4, 4), 4)
    np.testing.assert_allclose(crop, img, atol=1e-6)


def test_sample_pixels_bilinear_midpoint():
    img = np.array([[0.0, 1.0], [0.0, 1.0]], dtype=np.float32)
    val = sample_pixels(img, np.array([1.0]), np.array([1.0]))
    assert val[0] == pytest.approx(0.5)


def test_occlusion_masks_inside_image(small_dataset):
    occluded = apply_occlusion(small_dataset, 0.4, seed=3)
    changed = sum(
        not np.array_equal(a.image, b.image)
        for a, b in zip(small_dataset.records, occluded.records)
    )
    assert changed == len(small_dataset)
    for a, b in zip(small_dataset.records, occluded.records):
        np.testing.assert_array_equal(a.annotation.points, b.annotation.points)
