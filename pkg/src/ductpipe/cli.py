"""Command-line entry points for every pipeline stage.

Stages communicate through files (PGM rasters, JSON documents, the feature
CSV), so any stage can be replaced by an external producer of the same
format. Every command honors --seed for full determinism; a config file can
set shared defaults and explicit flags win over it.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import run_feature_benchmark
from .explain import global_importance, save_shap_report
from .features import (
    DUCT_COUNT_NAME,
    extract_feature_vector,
    feature_level,
    read_feature_table,
    write_feature_table,
)
from .instances import (
    connected_components,
    derive_instances_weak,
    load_instance_map,
    match_instances,
    morphological_close,
    save_instance_map,
)
from .learn import (
    BINARY_TASKS,
    ForestParams,
    LearnConfig,
    SavedModel,
    fit_fold_model,
    run_loocv,
    run_split_eval,
    save_model,
)
from .raster import (
    DEFAULT_FOREGROUND,
    DIAGNOSES,
    TissueLabel,
    binarize,
    load_boxes,
    load_manifest,
    read_label_raster,
)
from .rng import derive_rng
from .synth import SynthConfig, generate_dataset

CONFIG_KEYS = {
    "seed", "jobs", "connectivity", "aggregate", "include_duct_count", "policy",
    "radius", "min_area", "foreground", "n_trees", "max_depth", "min_leaf",
    "features_per_split", "pca_k", "repeats", "levels",
}

TASK_NAMES = tuple(BINARY_TASKS) + ("fourway",)

LEVEL_TAGS = {"roi": "ROI", "box": "duct box", "mask": "duct mask"}


def _load_config(path) -> dict:
    doc = json.loads(Path(path).read_text())
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return doc


def _opt(args, config: dict, key: str, default):
    """Flags win over the config file, which wins over the default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _parse_foreground(spec) -> frozenset:
    if spec is None:
        return DEFAULT_FOREGROUND
    if isinstance(spec, str):
        spec = [s.strip() for s in spec.split(",") if s.strip()]
    return frozenset(TissueLabel[name] for name in spec)


def _resolve_dataset(args) -> tuple[Path, list]:
    root = Path(args.dataset)
    manifest = root / "manifest.json" if root.is_dir() else root
    records = load_manifest(manifest)
    return manifest.parent, records


# ---------------------------------------------------------------------------
# Stage commands


def cmd_synth(args, config) -> int:
    synth_config = SynthConfig(size=_opt(args, config, "size", 512))
    manifest = generate_dataset(
        args.out, synth_config, per_class=args.per_class, seed=_opt(args, config, "seed", 0)
    )
    print(f"wrote {manifest}")
    return 0


def cmd_derive(args, config) -> int:
    root, records = _resolve_dataset(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    foreground = _parse_foreground(_opt(args, config, "foreground", None))
    policy = _opt(args, config, "policy", "smallest")
    radius = _opt(args, config, "radius", 2)
    connectivity = _opt(args, config, "connectivity", 4)
    min_area = _opt(args, config, "min_area", 64)
    total = 0
    for rec in records:
        raster = read_label_raster(root / rec.raster)
        mask = binarize(raster, foreground)
        if args.method == "weak":
            if rec.boxes is None:
                raise ValueError(f"roi {rec.id}: weak derivation requires a boxes document")
            boxes = load_boxes(root / rec.boxes, raster.width, raster.height)
            inst = derive_instances_weak(mask, boxes, policy)
        else:
            closed = morphological_close(mask, radius)
            inst = connected_components(closed, connectivity, min_area)
        save_instance_map(inst, out / f"{rec.id}.pgm", out / f"{rec.id}.json")
        total += len(inst)
    print(f"derived {total} instances over {len(records)} ROIs into {out}")
    return 0


def cmd_match(args, config) -> int:
    a = load_instance_map(args.a)
    b = load_instance_map(args.b)
    report = match_instances(a, b, args.threshold)
    doc = {
        "mean_iou": report.mean_iou,
        "matched_pairs": [[ia, ib, iou] for ia, ib, iou in report.matched_pairs],
        "unmatched_a": report.unmatched_a,
        "unmatched_b": report.unmatched_b,
    }
    text = json.dumps(doc, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_features(args, config) -> int:
    root, records = _resolve_dataset(args)
    inst_dir = Path(args.instances)
    policy = _opt(args, config, "aggregate", "mean")
    rows = []
    for rec in records:
        raster = read_label_raster(root / rec.raster)
        inst = load_instance_map(inst_dir / f"{rec.id}.pgm")
        fv = extract_feature_vector(raster, inst, policy=policy)
        rows.append((rec.id, rec.diagnosis, fv))
    write_feature_table(rows, args.out)
    print(f"wrote {len(rows)} feature rows to {args.out}")
    return 0


def _load_features(args, config):
    """Feature matrix with optional level filtering and duct-count column."""
    ids, diagnoses, duct_counts, X, names = read_feature_table(args.features)
    levels = _opt(args, config, "levels", "all")
    if levels != "all":
        wanted = set()
        for tag in levels.split(","):
            tag = tag.strip()
            if tag not in LEVEL_TAGS:
                raise ValueError(f"unknown level {tag!r}, expected roi, box, mask, or all")
            wanted.add(LEVEL_TAGS[tag])
        keep = [i for i, n in enumerate(names) if feature_level(n) in wanted]
        X = X[:, keep]
        names = tuple(names[i] for i in keep)
    if _opt(args, config, "include_duct_count", False):
        X = np.column_stack([X, duct_counts.astype(float)])
        names = names + (DUCT_COUNT_NAME,)
    return ids, diagnoses, X, names


def _learn_config(args, config) -> LearnConfig:
    return LearnConfig(
        forest=ForestParams(
            n_trees=_opt(args, config, "n_trees", 100),
            max_depth=_opt(args, config, "max_depth", None),
            min_leaf=_opt(args, config, "min_leaf", 1),
            features_per_split=_opt(args, config, "features_per_split", None),
        ),
        pca_k=_opt(args, config, "pca_k", 20),
    )


def cmd_train(args, config) -> int:
    ids, diagnoses, X, names = _load_features(args, config)
    cfg = _learn_config(args, config)
    seed = _opt(args, config, "seed", 0)
    if args.task == "fourway":
        keep = [i for i, dx in enumerate(diagnoses) if dx in DIAGNOSES]
        code = {dx: i for i, dx in enumerate(DIAGNOSES)}
        y = np.array([code[diagnoses[i]] for i in keep])
        classes = DIAGNOSES
    else:
        task = BINARY_TASKS[args.task]
        keep = [i for i, dx in enumerate(diagnoses) if dx in task.positive | task.negative]
        y = np.array([1 if diagnoses[i] in task.positive else 0 for i in keep])
        classes = ("negative", "positive")
    pca, forest = fit_fold_model(X[keep], y, cfg, seed, path=())
    forest.classes = classes
    save_model(SavedModel(forest=forest, pca=pca, feature_names=names), args.out)
    print(f"trained {args.task} model on {len(keep)} ROIs -> {args.out}")
    return 0


def cmd_eval(args, config) -> int:
    ids, diagnoses, X, names = _load_features(args, config)
    cfg = _learn_config(args, config)
    seed = _opt(args, config, "seed", 0)
    if args.task == "fourway":
        if not args.dataset:
            raise ValueError("--dataset is required for the fourway task (split source)")
        root, records = _resolve_dataset(args)
        split_by_id = {r.id: r.split for r in records}
        missing = [i for i in ids if i not in split_by_id]
        if missing:
            raise ValueError(f"feature rows missing from manifest: {missing[:5]}")
        splits = [split_by_id[i] for i in ids]
        repeats = _opt(args, config, "repeats", 10)
        report = run_split_eval(X, diagnoses, splits, cfg, repeats=repeats, seed=seed)
        doc = {"task": "fourway", "seed": seed, "report": report.as_dict()}
        summary = f"fourway accuracy {report.accuracy_mean:.3f} +/- {report.accuracy_std:.3f}"
    else:
        task = BINARY_TASKS[args.task]
        repeats = _opt(args, config, "repeats", 100)
        metrics = run_loocv(X, diagnoses, task, cfg, repeats=repeats, seed=seed)
        doc = {"task": task.name, "seed": seed, "report": metrics.as_dict()}
        summary = (
            f"{task.name}: accuracy {metrics.mean('accuracy'):.3f}"
            f" +/- {metrics.std('accuracy'):.3f}, f1 {metrics.mean('f1'):.3f}"
        )
    Path(args.out).write_text(json.dumps(doc, sort_keys=True) + "\n")
    print(summary)
    return 0


def cmd_explain(args, config) -> int:
    from .learn import load_model

    model = load_model(args.model)
    ids, diagnoses, duct_counts, X, names = read_feature_table(args.features)
    # project the table onto the model's feature names (train may have filtered levels)
    column = {n: i for i, n in enumerate(names)}
    cols = []
    for n in model.feature_names:
        if n == DUCT_COUNT_NAME:
            X = np.column_stack([X, duct_counts.astype(float)])
            cols.append(X.shape[1] - 1)
        elif n in column:
            cols.append(column[n])
        else:
            raise ValueError(f"feature table is missing model feature {n!r}")
    X = X[:, cols]
    seed = _opt(args, config, "seed", 0)
    rng = derive_rng(seed, 0)
    Xw = X
    feat_names = list(model.feature_names)
    if model.pca is not None:
        from .learn import pca_transform

        Xw = pca_transform(model.pca, X)
        feat_names = [f"component {i}" for i in range(Xw.shape[1])]
    n_bg = min(args.background, len(Xw))
    bg_rows = rng.choice(len(Xw), size=n_bg, replace=False)
    background = Xw[bg_rows]
    rows = Xw if args.limit == 0 else Xw[: args.limit]
    report = global_importance(model.forest, rows, background, feat_names)
    save_shap_report(report, feat_names, args.out, top_k=args.top)
    print(f"explained {len(rows)} ROIs -> {args.out}")
    for i, (name, value) in enumerate(report.ranking[: args.top]):
        print(f"{i + 1:2d}. {name}  ({value:.6f})")
    return 0


def cmd_benchmark(args, config) -> int:
    result = run_feature_benchmark(
        size=args.size, ducts=args.ducts, runs=args.runs, seed=_opt(args, config, "seed", 0)
    )
    print(json.dumps(result))
    return 0


def cmd_serve(args, config) -> int:
    from .serve import serve_forever

    serve_forever(
        dataset=args.dataset,
        host=args.host,
        port=args.port,
        ui_dir=args.ui,
        policy=_opt(args, config, "policy", "smallest"),
    )
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ductpipe", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; explicit flags override it")
        p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
        p.add_argument("--jobs", type=int, default=None, help="accepted for compatibility")

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=100, dest="per_class")
    p.add_argument("--size", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("derive", help="derive duct instances for every ROI")
    add_common(p)
    p.add_argument("--dataset", required=True, help="dataset dir or manifest path")
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=("weak", "cc"), default="weak")
    p.add_argument("--policy", choices=("smallest", "nearest-center", "first"), default=None)
    p.add_argument("--radius", type=int, default=None, help="closing radius (cc)")
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=None)
    p.add_argument("--min-area", type=int, default=None, dest="min_area")
    p.add_argument("--foreground", default=None, help="comma list of foreground labels")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("match", help="compare two instance rasters")
    add_common(p)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("features", help="extract the feature table")
    add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--instances", required=True, help="directory from the derive stage")
    p.add_argument("--out", required=True)
    p.add_argument("--aggregate", choices=("mean", "area_weighted"), default=None)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train a model on the whole table")
    add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--task", choices=TASK_NAMES, required=True)
    p.add_argument("--out", required=True)
    _add_learn_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run an evaluation protocol")
    add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--task", choices=TASK_NAMES, required=True)
    p.add_argument("--dataset", help="dataset dir or manifest (fourway split source)")
    p.add_argument("--out", required=True)
    p.add_argument("--repeats", type=int, default=None)
    _add_learn_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", help="Shapley attributions for a trained model")
    add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--background", type=int, default=64)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--limit", type=int, default=0, help="explain only the first N rows")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("benchmark", help="time the feature-extraction hot path")
    add_common(p)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--ducts", type=int, default=50)
    p.add_argument("--runs", type=int, default=5)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("serve", help="local annotation/derivation service")
    add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8077)
    p.add_argument("--ui", help="directory of static UI files to serve at /")
    p.add_argument("--policy", choices=("smallest", "nearest-center", "first"), default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def _add_learn_flags(p):
    p.add_argument("--levels", default=None, help="all or comma list of roi,box,mask")
    p.add_argument("--include-duct-count", action="store_const", const=True, default=None,
                   dest="include_duct_count")
    p.add_argument("--n-trees", type=int, default=None, dest="n_trees")
    p.add_argument("--max-depth", type=int, default=None, dest="max_depth")
    p.add_argument("--min-leaf", type=int, default=None, dest="min_leaf")
    p.add_argument("--features-per-split", type=int, default=None, dest="features_per_split")
    p.add_argument("--pca-k", type=int, default=None, dest="pca_k")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config) if getattr(args, "config", None) else {}
        return args.func(args, config)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
