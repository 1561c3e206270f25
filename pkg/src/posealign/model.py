"""The trained-model bundle and its on-disk container.

The container is a text header followed by a raw payload: a magic line, a
line with the JSON header's byte length, the JSON header (schema, scalars,
and an ordered array table), then every array's bytes concatenated in table
order as little-endian IEEE-754 (or little-endian int64 for index arrays).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .classifier import ClassifierHead, scores_batch
from .clustering import PoseClassSet
from .data import crop_window
from .errors import SchemaError
from .features import FeatureExtractor, RandomProjectionExtractor, TrainableMlpExtractor
from .inference import PosePosterior, posterior_from_scores, predict_landmarks
from .refine import BBoxRegressor, CascadedRegressor
from .shapes import FlipPermutation, denormalize_shape

MAGIC = b"POSEALIGN-MODEL 1\n"


@dataclass(frozen=True, eq=False)
class ModelSchema:
    n_points: int
    feature_dim: int
    n_classes: int
    image_size: int
    crop_size: int
    crop_margin: float
    flip_perm: FlipPermutation
    landmark_roles: dict = field(default_factory=dict)

    @property
    def nose_index(self) -> int:
        return self.landmark_roles.get("nose_tip", 0)


def extract_features(extractor, records, crop_margin: float = 0.2, return_crops: bool = False):
    """Crop every record's detection window and run the extractor."""
    crops = np.stack(
        [
            crop_window(r.image, r.annotation.bbox, extractor.input_size, crop_margin)
            for r in records
        ]
    )
    if return_crops:
        return crops
    return extractor.extract_batch(crops)


def config_fingerprint(config) -> str:
    import dataclasses

    if dataclasses.is_dataclass(config):
        payload = dataclasses.asdict(config)
    else:
        payload = dict(config)
    blob = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class AlignmentModel:
    """Everything needed to go from an image+box to landmark distributions."""

    schema: ModelSchema
    classes: PoseClassSet
    head: ClassifierHead
    extractor: FeatureExtractor
    tau: float
    tau_evidence: float
    fingerprint: str = ""
    cascade: CascadedRegressor | None = None
    bbox_regressor: BBoxRegressor | None = None

    def features(self, records) -> np.ndarray:
        return extract_features(self.extractor, records, self.schema.crop_margin)

    def posteriors(self, records) -> list:
        s = scores_batch(self.head, self.features(records))
        return [posterior_from_scores(row) for row in s]

    def posterior_for(self, record) -> PosePosterior:
        return self.posteriors([record])[0]

    def predict_pixels(self, record, p: PosePosterior | None = None, use_cascade: bool = False):
        """Pixel-space landmark prediction for one record."""
        from .inference import map_class
        from .refine import apply_regressor

        if p is None:
            p = self.posterior_for(record)
        bbox = record.annotation.bbox
        if use_cascade and self.cascade is not None:
            shape = apply_regressor(
                self.cascade, record.image, map_class(p), bbox, self.classes
            )
        else:
            shape = predict_landmarks(p, self.classes, mode="map")
        return denormalize_shape(shape, bbox)

    def info(self) -> dict:
        return {
            "K": self.classes.k,
            "N": self.schema.n_points,
            "D": self.schema.feature_dim,
            "tau": self.tau,
        }


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_EXTRACTOR_KINDS = {"random_projection": RandomProjectionExtractor, "mlp": TrainableMlpExtractor}


def _extractor_payload(ext):
    if isinstance(ext, RandomProjectionExtractor):
        meta = {
            "kind": "random_projection",
            "input_size": ext.input_size,
            "dim": ext.dim,
            "seed": ext.seed,
            "gain": ext.gain,
        }
        arrays = {"ext_projection": ext.projection, "ext_offset": ext.offset}
    elif isinstance(ext, TrainableMlpExtractor):
        meta = {"kind": "mlp", "input_size": ext.input_size, "hidden": ext.hidden, "dim": ext.dim}
        arrays = {"ext_w1": ext.w1, "ext_b1": ext.b1, "ext_w2": ext.w2, "ext_b2": ext.b2}
    else:
        raise SchemaError(f"extractor {type(ext).__name__} is not serializable")
    return meta, arrays


def _extractor_restore(meta, arrays):
    if meta["kind"] == "random_projection":
        ext = RandomProjectionExtractor(
            meta["input_size"], meta["dim"], meta.get("seed", 0), meta.get("gain", 3.0)
        )
        ext.projection = arrays["ext_projection"]
        ext.offset = arrays["ext_offset"]
        return ext
    if meta["kind"] == "mlp":
        ext = TrainableMlpExtractor(meta["input_size"], meta["hidden"], meta["dim"])
        ext.w1, ext.b1 = arrays["ext_w1"], arrays["ext_b1"]
        ext.w2, ext.b2 = arrays["ext_w2"], arrays["ext_b2"]
        return ext
    raise SchemaError(f"unknown extractor kind {meta['kind']!r}")


def save_model(model: AlignmentModel, path: str) -> None:
    ext_meta, arrays = _extractor_payload(model.extractor)
    arrays = dict(arrays)
    arrays["centers"] = model.classes.centers
    arrays["bandwidths"] = model.classes.bandwidths
    arrays["head_weights"] = model.head.weights
    arrays["head_bias"] = model.head.bias
    meta = {
        "schema": {
            "n_points": model.schema.n_points,
            "feature_dim": model.schema.feature_dim,
            "n_classes": model.schema.n_classes,
            "image_size": model.schema.image_size,
            "crop_size": model.schema.crop_size,
            "crop_margin": model.schema.crop_margin,
            "flip_perm": model.schema.flip_perm.perm.tolist(),
            "landmark_roles": model.schema.landmark_roles,
        },
        "tau": model.tau,
        "tau_evidence": model.tau_evidence,
        "fingerprint": model.fingerprint,
        "exemplar": model.classes.exemplar,
        "extractor": ext_meta,
        "cascade": None,
        "bbox_regressor": None,
    }
    if model.cascade is not None:
        meta["cascade"] = {
            "patch_radius": model.cascade.patch_radius,
            "grid": model.cascade.grid,
        }
        arrays["cascade_betas"] = model.cascade.betas
        arrays["cascade_groups"] = model.cascade.group_of_class
    if model.bbox_regressor is not None:
        meta["bbox_regressor"] = {"lam": model.bbox_regressor.lam}
        arrays["bbox_beta"] = model.bbox_regressor.beta

    table = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        dtype = "<i8" if np.issubdtype(arr.dtype, np.integer) else "<f8"
        table.append({"name": name, "dtype": dtype, "shape": list(arr.shape)})
        blobs.append(np.ascontiguousarray(arr, dtype=dtype).tobytes())
    meta["arrays"] = table

    header = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(str(len(header)).encode() + b"\n")
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_model(path: str) -> AlignmentModel:
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != MAGIC:
            raise SchemaError(f"not a model file: bad magic {magic!r}")
        try:
            header_len = int(fh.readline().strip())
        except ValueError:
            raise SchemaError("corrupt model header length") from None
        meta = json.loads(fh.read(header_len).decode())
        arrays = {}
        for ent in meta["arrays"]:
            arr = np.frombuffer(
                fh.read(int(np.prod(ent["shape"], dtype=np.int64)) * 8), dtype=ent["dtype"]
            )
            arrays[ent["name"]] = arr.reshape(ent["shape"]).astype(
                np.int64 if ent["dtype"] == "<i8" else np.float64
            )

    sch = meta["schema"]
    schema = ModelSchema(
        n_points=sch["n_points"],
        feature_dim=sch["feature_dim"],
        n_classes=sch["n_classes"],
        image_size=sch["image_size"],
        crop_size=sch["crop_size"],
        crop_margin=sch["crop_margin"],
        flip_perm=FlipPermutation(np.asarray(sch["flip_perm"], dtype=np.int64)),
        landmark_roles=dict(sch["landmark_roles"]),
    )
    classes = PoseClassSet(
        centers=arrays["centers"],
        bandwidths=arrays["bandwidths"],
        exemplar=bool(meta.get("exemplar", False)),
    )
    head = ClassifierHead(weights=arrays["head_weights"], bias=arrays["head_bias"])
    extractor = _extractor_restore(meta["extractor"], arrays)
    cascade = None
    if meta.get("cascade"):
        cascade = CascadedRegressor(
            betas=arrays["cascade_betas"],
            group_of_class=arrays["cascade_groups"],
            patch_radius=meta["cascade"]["patch_radius"],
            grid=meta["cascade"]["grid"],
        )
    bbox_reg = None
    if meta.get("bbox_regressor"):
        bbox_reg = BBoxRegressor(beta=arrays["bbox_beta"], lam=meta["bbox_regressor"]["lam"])
    return AlignmentModel(
        schema=schema,
        classes=classes,
        head=head,
        extractor=extractor,
        tau=meta["tau"],
        tau_evidence=meta["tau_evidence"],
        fingerprint=meta.get("fingerprint", ""),
        cascade=cascade,
        bbox_regressor=bbox_reg,
    )


def build_model(
    dataset,
    extractor,
    classes,
    head,
    tau,
    tau_evidence=None,
    fingerprint="",
    cascade=None,
    bbox_regressor=None,
    crop_margin: float = 0.2,
) -> AlignmentModel:
    """Assemble a model from trained parts plus the dataset schema."""
    schema = ModelSchema(
        n_points=dataset.schema.n_points,
        feature_dim=extractor.dim,
        n_classes=classes.k,
        image_size=dataset.schema.image_size,
        crop_size=extractor.input_size,
        crop_margin=crop_margin,
        flip_perm=dataset.schema.flip_perm,
        landmark_roles=dict(dataset.schema.landmark_roles),
    )
    return AlignmentModel(
        schema=schema,
        classes=classes,
        head=head,
        extractor=extractor,
        tau=tau,
        tau_evidence=tau / 2 if tau_evidence is None else tau_evidence,
        fingerprint=fingerprint,
        cascade=cascade,
        bbox_regressor=bbox_regressor,
    )
