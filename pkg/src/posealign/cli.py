"""Command-line pipeline: gen-data, cluster, train, eval, bench, smooth, serve.

Exit codes: 0 success, 1 usage/configuration, 2 IO or schema, 3 numeric
divergence.  Failures print one machine-parseable JSON line to stderr.
Flags may come from a JSON config file (--config); explicit flags win, and
unknown config keys are rejected.  POSEALIGN_MODEL provides the default
--model path.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .errors import (
    ConfigurationError,
    PoseAlignError,
    PtsParseError,
    SchemaError,
    SplitError,
    TrainingDivergedError,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DIVERGED = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def build_parser() -> _Parser:
    p = _Parser(prog="posealign", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--config", default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--n-examples", type=int, default=None)
    g.add_argument("--n-videos", type=int, default=None)
    g.add_argument("--frames-per-video", type=int, default=None)
    g.add_argument("--n-landmarks", type=int, default=None)
    g.add_argument("--image-size", type=int, default=None)

    c = sub.add_parser("cluster", help="build pose classes and report memberships")
    c.add_argument("--data", required=True)
    c.add_argument("--config", default=None)
    c.add_argument("--k", default=None)
    c.add_argument("--tau", type=float, default=None)
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--out", default=None)

    t = sub.add_parser("train", help="train a classifier model")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--config", default=None)
    t.add_argument("--k", default=None, help="class count or 'exemplar'")
    t.add_argument("--tau", default=None, help="membership threshold or 'auto'")
    t.add_argument("--loss", default=None, choices=["softmax", "soft_target", "multi_label"])
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--feature-dim", type=int, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--val-fraction", type=float, default=None)
    t.add_argument("--frame-stride", type=int, default=None)
    t.add_argument("--cascade", action="store_true", default=None)
    t.add_argument("--cascade-groups", type=int, default=None)
    t.add_argument("--cascade-levels", type=int, default=None)

    e = sub.add_parser("eval", help="evaluate a model on a dataset")
    e.add_argument("--data", required=True)
    e.add_argument("--model", default=None)
    e.add_argument("--config", default=None)
    e.add_argument("--policy", default=None, choices=["none", "1pt", "best"])
    e.add_argument("--occlude", type=float, default=None)
    e.add_argument("--cascade", action="store_true", default=None)
    e.add_argument("--hard-fraction", type=float, default=None)
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--report", default=None)

    b = sub.add_parser("bench", help="head-scaling microbenchmark")
    b.add_argument("--config", default=None)
    b.add_argument("--dim", type=int, default=None)
    b.add_argument("--k-grid", default=None, help="comma-separated ascending K values")
    b.add_argument("--flops-multiple", type=float, default=None)
    b.add_argument("--repeats", type=int, default=None)
    b.add_argument("--out", default=None)

    s = sub.add_parser("smooth", help="HMM decode and low-pass smooth videos")
    s.add_argument("--data", required=True)
    s.add_argument("--model", default=None)
    s.add_argument("--config", default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--video", default=None)
    s.add_argument("--window", type=int, default=None)
    s.add_argument("--tau-hmm", type=float, default=None)

    v = sub.add_parser("serve", help="run the annotation HTTP service")
    v.add_argument("--data", required=True)
    v.add_argument("--model", default=None)
    v.add_argument("--config", default=None)
    v.add_argument("--host", default=None)
    v.add_argument("--port", type=int, default=None)
    return p


def _merge_config(args: argparse.Namespace, parser_dests: set) -> argparse.Namespace:
    """Config-file values fill in flags the user did not pass."""
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
        unknown = [k for k in cfg if k not in parser_dests]
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        for key, value in cfg.items():
            if getattr(args, key, None) is None:
                setattr(args, key, value)
    return args


def _default(value, fallback):
    return fallback if value is None else value


def _require_model_path(args) -> str:
    path = getattr(args, "model", None) or os.environ.get("POSEALIGN_MODEL")
    if not path:
        raise ConfigurationError("no model path: pass --model or set POSEALIGN_MODEL")
    return path


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cmd_gen_data(args) -> int:
    from .data import save_dataset
    from .synthetic import SyntheticConfig, generate_synthetic

    cfg = SyntheticConfig(
        n_landmarks=_default(args.n_landmarks, 15),
        n_examples=_default(args.n_examples, 200),
        image_size=_default(args.image_size, 64),
        seed=_default(args.seed, 0),
        n_videos=_default(args.n_videos, 0),
        frames_per_video=_default(args.frames_per_video, 0),
    )
    dataset = generate_synthetic(cfg)
    save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} records to {args.out}")
    return EXIT_OK


def _parse_k(value, m):
    if value is None or value == "exemplar":
        return m
    return int(value)


def _cmd_cluster(args) -> int:
    from .clustering import build_pose_classes, membership_histogram, membership_sets
    from .data import load_dataset
    from .evaluation import default_tau_grid
    from .shapes import normalize_shape

    dataset = load_dataset(args.data)
    shapes = [normalize_shape(r.annotation) for r in dataset.records]
    k = _parse_k(args.k, len(shapes))
    classes, _ = build_pose_classes(shapes, k, _default(args.seed, 0))
    tau = args.tau if args.tau is not None else default_tau_grid(shapes)[1]
    ms = membership_sets(classes, shapes, tau)
    hist = membership_histogram(ms)
    summary = {
        "k": classes.k,
        "exemplar": classes.exemplar,
        "tau": tau,
        "membership_sizes": {
            "min": int(ms.sizes().min()),
            "median": float(np.median(ms.sizes())),
            "max": int(ms.sizes().max()),
        },
        "histogram": hist.tolist(),
    }
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    print(json.dumps({k: v for k, v in summary.items() if k != "histogram"}))
    return EXIT_OK


def _cmd_train(args) -> int:
    from .classifier import TrainConfig, train
    from .clustering import assign_classes, build_pose_classes, membership_sets
    from .data import flip_augment, load_dataset, split_and_subsample
    from .evaluation import evaluate_model, select_tau
    from .features import RandomProjectionExtractor
    from .model import build_model, config_fingerprint, extract_features, save_model
    from .refine import train_pose_regressors
    from .shapes import normalize_shape

    dataset = load_dataset(args.data)
    seed = _default(args.seed, 0)
    if dataset.video_ids():
        train_ds, val_ds = split_and_subsample(
            dataset, _default(args.val_fraction, 0.15), _default(args.frame_stride, 1), seed
        )
    else:
        train_ds, val_ds = dataset, dataset
    train_ds = flip_augment(train_ds)

    extractor = RandomProjectionExtractor(
        input_size=48, dim=_default(args.feature_dim, 128), seed=seed
    )
    config = TrainConfig(
        loss=_default(args.loss, "multi_label"),
        learning_rate=_default(args.lr, 0.5),
        epochs=_default(args.epochs, 20),
        batch_size=_default(args.batch_size, 64),
        seed=seed,
    )
    shapes = [normalize_shape(r.annotation) for r in train_ds.records]
    k = _parse_k(args.k, len(shapes))

    if args.tau in (None, "auto"):
        tau, _ = select_tau(
            train_ds, val_ds, extractor, k,
            TrainConfig(loss=config.loss, epochs=max(3, config.epochs // 4), seed=seed),
        )
    else:
        tau = float(args.tau)

    classes, assignments = build_pose_classes(shapes, k, seed)
    ms = membership_sets(classes, shapes, tau)
    features = extract_features(extractor, train_ds.records)
    head = train(train_ds, extractor, classes, ms, config,
                 features=features, assignments=assignments)

    cascade = None
    if args.cascade:
        cascade = train_pose_regressors(
            train_ds, classes, ms,
            n_groups=_default(args.cascade_groups, min(100, classes.k)),
            n_levels=_default(args.cascade_levels, 7),
            seed=seed,
        )

    model = build_model(
        train_ds, extractor, classes, head, tau,
        fingerprint=config_fingerprint(config), cascade=cascade,
    )
    save_model(model, args.out)
    val_err = evaluate_model(model, val_ds)
    print(f"trained K={classes.k} tau={tau:.4f}; val error {val_err.mean():.4f}; saved {args.out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    from .data import apply_occlusion, load_dataset
    from .evaluation import (
        ced_stats,
        evaluate_model,
        hard_subset,
        interactive_eval,
        write_table_csv,
        write_table_json,
    )
    from .model import load_model

    model = load_model(_require_model_path(args))
    dataset = load_dataset(args.data)
    if args.hard_fraction:
        dataset = hard_subset(dataset, args.hard_fraction)
    if args.occlude:
        dataset = apply_occlusion(dataset, args.occlude, _default(args.seed, 0))

    rows = []
    if args.policy in ("1pt", "best"):
        report = interactive_eval(dataset, model)
        for policy, label in (("none", "none"), ("fixed_point", "1pt"), ("best_point", "best")):
            rows.append({"policy": label, "failure_rate": report[policy]["failure_rate"],
                         "mean_error": report[policy]["mean_error"],
                         "fallbacks": report[policy]["fallbacks"]})
            print(f"FR[{label}] = {report[policy]['failure_rate']:.3f}%")
    else:
        errors = evaluate_model(model, dataset, use_cascade=_default(args.cascade, False))
        stats = ced_stats(errors)
        rows.append({"policy": "none", "mean_error": float(errors.mean()),
                     "auc": stats.auc, "failure_rate": stats.failure_rate})
        print(
            f"mean error {errors.mean():.4f}, AUC {stats.auc:.3f}, FR {stats.failure_rate:.3f}%"
        )
    if args.report:
        if args.report.endswith(".json"):
            write_table_json(rows, args.report)
        else:
            write_table_csv(rows, args.report)
    return EXIT_OK


def _cmd_bench(args) -> int:
    from .bench import bench_head_scaling, head_flops, machine_fingerprint
    from .evaluation import write_table_csv, write_table_json

    dim = _default(args.dim, 64)
    k_grid = [int(x) for x in _default(args.k_grid, "10,100,1000,10000").split(",")]
    mult = _default(args.flops_multiple, 100.0)
    rows = bench_head_scaling(
        dim, k_grid, extractor_flops=mult * head_flops(max(k_grid), dim),
        repeats=_default(args.repeats, 120),
    )
    print(f"machine: {machine_fingerprint()}")
    for r in rows:
        print(
            f"K={r.k:>7d} params={r.param_scalars:>10d} "
            f"total={r.median_total_ms:.3f}ms head_share={r.head_share:.3f}"
        )
    if args.out:
        if args.out.endswith(".json"):
            write_table_json(rows, args.out)
        else:
            write_table_csv(rows, args.out)
    return EXIT_OK


def _cmd_smooth(args) -> int:
    from .data import load_dataset
    from .evaluation import pt_pt_error
    from .inference import map_class
    from .model import load_model
    from .pts import serialize_pts
    from .shapes import denormalize_shape
    from .temporal import FrameSequence, build_transitions, lowpass_smooth, viterbi

    model = load_model(_require_model_path(args))
    dataset = load_dataset(args.data)
    vids = [args.video] if args.video else dataset.video_ids()
    if not vids:
        raise SchemaError("dataset has no videos to smooth")
    os.makedirs(args.out, exist_ok=True)
    trans = build_transitions(model.classes, _default(args.tau_hmm, model.tau))

    report = []
    for vid in vids:
        frames = dataset.video_frames(vid)
        posteriors = model.posteriors(frames)
        raw_classes = [map_class(p) for p in posteriors]
        seq = FrameSequence(np.stack([p.probs for p in posteriors]))
        path = viterbi(seq, trans)
        shapes = [model.classes.center_shape(int(k)) for k in path]
        smoothed = lowpass_smooth(shapes, _default(args.window, 3))
        raw_err, out_err = [], []
        for t, (rec, shape) in enumerate(zip(frames, smoothed)):
            pixels = denormalize_shape(shape, rec.annotation.bbox)
            with open(os.path.join(args.out, f"{vid}_{t:06d}.pts"), "w") as fh:
                fh.write(serialize_pts(pixels))
            raw_pred = denormalize_shape(
                model.classes.center_shape(raw_classes[t]), rec.annotation.bbox
            )
            raw_err.append(pt_pt_error(raw_pred, rec.annotation))
            out_err.append(pt_pt_error(pixels, rec.annotation))
        report.append({"video": vid, "frames": len(frames),
                       "raw_error": float(np.mean(raw_err)),
                       "smoothed_error": float(np.mean(out_err))})
        print(f"{vid}: raw {np.mean(raw_err):.4f} -> smoothed {np.mean(out_err):.4f}")
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .data import load_dataset
    from .model import load_model
    from .service import serve

    model = load_model(_require_model_path(args))
    dataset = load_dataset(args.data)
    serve(model, dataset, host=_default(args.host, "127.0.0.1"), port=_default(args.port, 8008))
    return EXIT_OK


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "cluster": _cmd_cluster,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
    "smooth": _cmd_smooth,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        dests = {a.dest for sp in parser._subparsers._group_actions for a in sp.choices.values()
                 for a in a._actions}
        args = _merge_config(args, dests)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        _emit_error("usage", str(exc))
        return EXIT_USAGE
    except ConfigurationError as exc:
        _emit_error("configuration", str(exc))
        return EXIT_USAGE
    except TrainingDivergedError as exc:
        _emit_error("divergence", str(exc))
        return EXIT_DIVERGED
    except (PtsParseError, SchemaError, SplitError) as exc:
        _emit_error("schema", str(exc))
        return EXIT_IO
    except (OSError, json.JSONDecodeError) as exc:
        _emit_error("io", str(exc))
        return EXIT_IO
    except PoseAlignError as exc:
        _emit_error("error", str(exc))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
