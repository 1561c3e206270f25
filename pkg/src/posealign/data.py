"""Dataset containers, disk layout, splitting, and flip augmentation.

A dataset on disk is a directory with ``manifest.jsonl`` (one JSON object per
record, schema object on the first line), 8-bit grayscale PNG images, and one
.pts file per record.  Images in memory are float32 arrays in [0, 1] whose
values are multiples of 1/255, so the disk round trip is lossless.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image

from .errors import SchemaError, SplitError
from .pts import parse_pts, serialize_pts
from .shapes import BBox, FlipPermutation, RawAnnotation


@dataclass(frozen=True, eq=False)
class DatasetSchema:
    """Per-dataset landmark layout shared by every record."""

    n_points: int
    flip_perm: FlipPermutation
    landmark_roles: dict = field(default_factory=dict)
    image_size: int = 64

    @property
    def nose_index(self) -> int:
        return self.landmark_roles.get("nose_tip", 0)


@dataclass(frozen=True, eq=False)
class DatasetRecord:
    """One image with its annotation and optional video/frame identity."""

    image: np.ndarray
    annotation: RawAnnotation
    video_id: str | None = None
    frame_index: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        img = np.asarray(self.image, dtype=np.float32)
        if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
            raise SchemaError(f"expected 2-D grayscale image, got shape {img.shape}")
        img = img.copy()
        img.flags.writeable = False
        object.__setattr__(self, "image", img)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered record list plus the schema they all share."""

    records: list
    schema: DatasetSchema

    def __post_init__(self):
        for rec in self.records:
            if rec.annotation.n_points != self.schema.n_points:
                raise SchemaError(
                    f"record {rec.annotation.image_ref!r} has "
                    f"{rec.annotation.n_points} points, schema says {self.schema.n_points}"
                )
        object.__setattr__(self, "records", _sorted_by_video(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def video_ids(self) -> list:
        seen = dict.fromkeys(r.video_id for r in self.records if r.video_id is not None)
        return list(seen)

    def video_frames(self, video_id) -> list:
        return [r for r in self.records if r.video_id == video_id]


def _sorted_by_video(records):
    # Stable order: non-video records stay in place relative to each other,
    # frames within a video are ordered by frame_index.
    def key(item):
        idx, rec = item
        if rec.video_id is None:
            return (0, idx, 0)
        return (1, rec.video_id, rec.frame_index if rec.frame_index is not None else idx)

    return [rec for _, rec in sorted(enumerate(records), key=lambda p: key(p))]


# ---------------------------------------------------------------------------
# Splitting and augmentation
# ---------------------------------------------------------------------------


def split_and_subsample(dataset: Dataset, val_fraction: float, frame_stride: int, seed):
    """Hold out whole videos for validation, stride-subsample training frames.

    Validation videos are picked at random (seeded) from the distinct video
    ids; training videos keep every ``frame_stride``-th frame starting at the
    first.  Records without a video id always stay in the training split.
    """
    if not 0 < val_fraction < 1:
        raise SplitError(f"val_fraction must be in (0, 1), got {val_fraction}")
    if frame_stride < 1:
        raise SplitError(f"frame_stride must be >= 1, got {frame_stride}")
    vids = dataset.video_ids()
    if len(vids) < 2:
        raise SplitError(f"need at least 2 videos to split, have {len(vids)}")

    rng = np.random.default_rng(seed)
    n_val = max(1, int(round(val_fraction * len(vids))))
    if n_val >= len(vids):
        n_val = len(vids) - 1
    val_vids = set(np.asarray(vids, dtype=object)[rng.permutation(len(vids))[:n_val]])

    train, val = [], []
    for vid in dataset.video_ids():
        frames = dataset.video_frames(vid)
        if vid in val_vids:
            val.extend(frames)
        else:
            train.extend(frames[::frame_stride])
    train.extend(r for r in dataset.records if r.video_id is None)

    return (
        Dataset(train, dataset.schema),
        Dataset(val, dataset.schema),
    )


def flip_record(rec: DatasetRecord, perm: FlipPermutation) -> DatasetRecord:
    """Mirror one record: image, landmarks, and bbox, with identity reordering."""
    w = rec.image.shape[1]
    image = np.ascontiguousarray(rec.image[:, ::-1])
    pts = rec.annotation.points.copy()
    pts[:, 0] = w - pts[:, 0]
    pts = pts[perm.perm]
    bb = rec.annotation.bbox
    bbox = BBox(w - bb.x - bb.w, bb.y, bb.w, bb.h)
    meta = dict(rec.meta)
    if "yaw" in meta:
        meta["yaw"] = -meta["yaw"]
    if "roll" in meta:
        meta["roll"] = -meta["roll"]
    meta["flipped"] = True
    return DatasetRecord(
        image=image,
        annotation=RawAnnotation(pts, bbox, rec.annotation.image_ref + "~flip"),
        video_id=None if rec.video_id is None else rec.video_id + "~flip",
        frame_index=rec.frame_index,
        meta=meta,
    )


def flip_augment(dataset: Dataset) -> Dataset:
    """Double a dataset with left-right mirrored copies of every record."""
    perm = dataset.schema.flip_perm
    flipped = [flip_record(r, perm) for r in dataset.records]
    return Dataset(list(dataset.records) + flipped, dataset.schema)


def apply_occlusion(dataset: Dataset, area_fraction: float, seed, fill: float = 0.5) -> Dataset:
    """Mask a random rectangle inside each record's bbox with a constant fill.

    Simulates occluders for robustness experiments; landmarks are untouched.
    """
    rng = np.random.default_rng(seed)
    out = []
    for rec in dataset.records:
        img = rec.image.copy()
        h, w = img.shape
        bb = rec.annotation.bbox
        area = area_fraction * bb.w * bb.h
        aspect = rng.uniform(0.6, 1.6)
        rw = min(w, math.sqrt(area * aspect))
        rh = min(h, area / max(rw, 1e-9))
        cx = rng.uniform(bb.x, bb.x + bb.w)
        cy = rng.uniform(bb.y, bb.y + bb.h)
        x0 = int(np.clip(cx - rw / 2, 0, w - 1))
        x1 = int(np.clip(cx + rw / 2, x0 + 1, w))
        y0 = int(np.clip(cy - rh / 2, 0, h - 1))
        y1 = int(np.clip(cy + rh / 2, y0 + 1, h))
        img[y0:y1, x0:x1] = fill
        out.append(replace(rec, image=img))
    return Dataset(out, dataset.schema)


# ---------------------------------------------------------------------------
# Raster utilities
# ---------------------------------------------------------------------------


def quantize_image(img: np.ndarray) -> np.ndarray:
    """Clip to [0, 1] and snap to the 256-level grid used on disk."""
    q = np.round(np.clip(img, 0.0, 1.0) * 255.0)
    return (q / 255.0).astype(np.float32)


def crop_window(image: np.ndarray, bbox: BBox, out_size: int, margin: float = 0.0) -> np.ndarray:
    """Bilinearly resample a bbox window (optionally expanded) to a square.

    Coordinates follow the corner convention: the image covers
    [0, W] x [0, H] and pixel (r, c) is sampled at (c + 0.5, r + 0.5).
    Samples outside the image clamp to the border.
    """
    h, w = image.shape
    cx, cy = bbox.center
    bw, bh = bbox.w * (1 + margin), bbox.h * (1 + margin)
    x0, y0 = cx - bw / 2, cy - bh / 2
    ticks = (np.arange(out_size) + 0.5) / out_size
    xs = x0 + ticks * bw - 0.5
    ys = y0 + ticks * bh - 0.5
    return _bilinear(image, xs, ys)


def _bilinear(image, xs, ys):
    h, w = image.shape
    gx = np.clip(xs, 0.0, w - 1.0)
    gy = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(gx).astype(int)
    y0 = np.floor(gy).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (gx - x0)[None, :]
    fy = (gy - y0)[:, None]
    top = image[np.ix_(y0, x0)] * (1 - fx) + image[np.ix_(y0, x1)] * fx
    bot = image[np.ix_(y1, x0)] * (1 - fx) + image[np.ix_(y1, x1)] * fx
    return (top * (1 - fy) + bot * fy).astype(np.float32)


def sample_pixels(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear point samples at arbitrary (x, y) pixel positions."""
    h, w = image.shape
    gx = np.clip(np.asarray(xs, dtype=np.float64) - 0.5, 0.0, w - 1.0)
    gy = np.clip(np.asarray(ys, dtype=np.float64) - 0.5, 0.0, h - 1.0)
    x0 = np.floor(gx).astype(int)
    y0 = np.floor(gy).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = gx - x0
    fy = gy - y0
    top = image[y0, x0] * (1 - fx) + image[y0, x1] * fx
    bot = image[y1, x0] * (1 - fx) + image[y1, x1] * fx
    return top * (1 - fy) + bot * fy


# ---------------------------------------------------------------------------
# Disk layout
# ---------------------------------------------------------------------------


def save_dataset(dataset: Dataset, out_dir: str) -> None:
    """Write manifest.jsonl, PNG images, and .pts files under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    img_dir = os.path.join(out_dir, "images")
    pts_dir = os.path.join(out_dir, "annotations")
    os.makedirs(img_dir, exist_ok=True)
    os.makedirs(pts_dir, exist_ok=True)

    lines = [
        json.dumps(
            {
                "schema": {
                    "n_points": dataset.schema.n_points,
                    "flip_perm": dataset.schema.flip_perm.perm.tolist(),
                    "landmark_roles": dataset.schema.landmark_roles,
                    "image_size": dataset.schema.image_size,
                }
            },
            sort_keys=True,
        )
    ]
    for i, rec in enumerate(dataset.records):
        stem = f"{i:06d}"
        img_u8 = np.round(rec.image * 255.0).astype(np.uint8)
        Image.fromarray(img_u8, mode="L").save(os.path.join(img_dir, stem + ".png"))
        with open(os.path.join(pts_dir, stem + ".pts"), "w") as fh:
            fh.write(serialize_pts(rec.annotation.points))
        lines.append(
            json.dumps(
                {
                    "image": f"images/{stem}.png",
                    "pts": f"annotations/{stem}.pts",
                    "bbox": rec.annotation.bbox.as_array().tolist(),
                    "image_ref": rec.annotation.image_ref or stem,
                    "video_id": rec.video_id,
                    "frame_index": rec.frame_index,
                    "meta": rec.meta,
                },
                sort_keys=True,
            )
        )
    with open(os.path.join(out_dir, "manifest.jsonl"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset(root: str) -> Dataset:
    """Load a dataset written by :func:`save_dataset`."""
    manifest = os.path.join(root, "manifest.jsonl")
    with open(manifest) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise SchemaError(f"empty manifest {manifest!r}")
    head = json.loads(lines[0])
    if "schema" not in head:
        raise SchemaError(f"manifest {manifest!r} missing schema line")
    sch = head["schema"]
    schema = DatasetSchema(
        n_points=int(sch["n_points"]),
        flip_perm=FlipPermutation(np.asarray(sch["flip_perm"], dtype=np.int64)),
        landmark_roles=dict(sch.get("landmark_roles", {})),
        image_size=int(sch.get("image_size", 64)),
    )
    records = []
    for ln in lines[1:]:
        ent = json.loads(ln)
        img = np.asarray(Image.open(os.path.join(root, ent["image"])), dtype=np.float32) / 255.0
        with open(os.path.join(root, ent["pts"])) as fh:
            pts = parse_pts(fh.read())
        x, y, w, h = ent["bbox"]
        records.append(
            DatasetRecord(
                image=img,
                annotation=RawAnnotation(pts, BBox(x, y, w, h), ent.get("image_ref", "")),
                video_id=ent.get("video_id"),
                frame_index=ent.get("frame_index"),
                meta=dict(ent.get("meta", {})),
            )
        )
    return Dataset(records, schema)
