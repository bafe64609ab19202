"""Command line entry point: preprocess -> train -> evaluate -> explain -> render.

Every subcommand reads and writes under ``--out``::

    train.json / train.csv        processed training set (+ preprocessing state)
    test.json / test.csv          processed test set
    significance.json             per-feature significance of the full feature set
    model.json                    trained, labelled map with quality metrics
    eval.json                     confusion counts and rate metrics
    bundle/                       explanation JSONs and SVG figures

Settings come from an optional JSON ``--config`` file; command line flags
override it.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import __version__
from .classify import label_units, resolve_unlabeled, evaluate
from .explain import explanation_bundle
from .ingest import (
    DataError,
    FlowPreprocessor,
    SCHEMAS,
    binarize_labels,
    load_csv,
    stratified_split,
    stratified_subset,
)
from .persist import (
    FormatError,
    dump_json,
    load_json,
    read_dataset,
    read_model,
    write_bundle,
    write_dataset,
    write_model,
    heatmap_files,
    safe_name,
)
from .quality import quality_report
from .render import RenderSpec, render_bars, render_grid
from .som import TrainConfig, init_map, train

logger = logging.getLogger("somids")

DEFAULTS = {
    "train": None,
    "test": None,
    "schema": "generic",
    "threshold": 0.01,
    "subset": None,
    "test_fraction": 0.3,
    "map_size": [18, 18],
    "steps": 10_000,
    "epochs": None,
    "max_steps": 200_000,
    "lr0": 0.7,
    "radius0": None,
    "seed": 0,
    "k": 2,
    "samples": [],
    "dataset": "test",
    "colormap": "gray",
    "out": "out",
}


class UsageError(ValueError):
    pass


def _map_size(text):
    try:
        if isinstance(text, (list, tuple)):
            n, m = (int(v) for v in text)
        else:
            n, m = (int(v) for v in str(text).lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"map size must look like 18x18, got {text!r}")
    if n < 1 or m < 1:
        raise argparse.ArgumentTypeError("map dimensions must be positive")
    return [n, m]


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def resolve_config(args) -> SimpleNamespace:
    """Merge defaults, the optional JSON config file and explicit flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = sorted(set(loaded) - set(DEFAULTS))
        if unknown:
            raise UsageError(f"unknown config keys: {unknown}")
        cfg.update(loaded)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None and value != []:
            cfg[key] = value
    cfg["map_size"] = _map_size(cfg["map_size"])
    if cfg["schema"] not in SCHEMAS:
        raise UsageError(f"unknown schema {cfg['schema']!r}")
    for key in ("steps", "epochs", "max_steps", "k", "subset"):
        if cfg[key] is not None and int(cfg[key]) < 1:
            raise UsageError(f"{key} must be a positive integer")
    return SimpleNamespace(**cfg)


def _metadata(cfg, command):
    return {"package_version": __version__, "command": command, "config": vars(cfg)}


def _out(cfg) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# subcommands


def cmd_preprocess(cfg) -> dict:
    if not cfg.train:
        raise UsageError("preprocess needs --train")
    out = _out(cfg)
    raw_train = load_csv(cfg.train, cfg.schema)
    raw_test = load_csv(cfg.test, cfg.schema) if cfg.test else None

    pre = FlowPreprocessor(threshold=cfg.threshold)
    if raw_test is None:
        # no separate test file: stratified split of the training table
        labels = binarize_labels(raw_train).data[raw_train.label_name]
        tr_idx, te_idx = stratified_split(labels, cfg.test_fraction, cfg.seed)
        raw_test = raw_train.take(te_idx)
        raw_train = raw_train.take(tr_idx)
    if cfg.subset:
        labels = binarize_labels(raw_train).data[raw_train.label_name]
        raw_train = raw_train.take(stratified_subset(labels, int(cfg.subset), cfg.seed))

    train_ds = pre.fit_transform(raw_train)
    test_ds = pre.transform(raw_test)
    meta = _metadata(cfg, "preprocess")
    write_dataset(train_ds, out / "train.json", preprocessing=pre.to_dict(), metadata=meta)
    write_dataset(test_ds, out / "test.json", preprocessing=pre.to_dict(), metadata=meta)
    dump_json({
        "method": "relative-variance",
        "threshold": cfg.threshold,
        "features": [{"feature": n, "significance": float(v), "selected": n in pre.selected_}
                     for n, v in zip(pre.all_features_, pre.significance_)],
        "replacements": pre.replacements_,
        "metadata": meta,
    }, out / "significance.json")
    print(f"selected {len(pre.selected_)} of {len(pre.all_features_)} features "
          f"(threshold {cfg.threshold}):")
    for name in pre.selected_:
        print(f"  {name}")
    print(f"train: {train_ds.num_samples} samples, test: {test_ds.num_samples} samples")
    return {"train": train_ds, "test": test_ds, "preprocessor": pre}


def cmd_train(cfg) -> dict:
    out = _out(cfg)
    data, _ = read_dataset(out / "train.json")
    n, m = cfg.map_size
    config = TrainConfig(steps=int(cfg.steps), lr0=float(cfg.lr0),
                         radius0=None if cfg.radius0 is None else float(cfg.radius0),
                         seed=int(cfg.seed), epochs=None if cfg.epochs is None else int(cfg.epochs),
                         max_steps=int(cfg.max_steps))
    initial = init_map(n, m, data.dim, config.seed)
    som, trace = train(initial, data, config)
    raw = label_units(som, data)
    lm = resolve_unlabeled(raw)
    q = quality_report(som, data)
    metrics = {
        "quality": q.to_dict(),
        "malicious_unit_fraction": raw.malicious_fraction,
        "unlabeled_units_resolved": int(np.sum(raw.unit_label < 0)),
        "total_steps": config.total_steps(data.num_samples),
    }
    tc = config.to_dict()
    tc["radius0"] = config.initial_radius(n, m)
    write_model(lm, out / "model.json", data.feature_names, train_config=tc,
                final_metrics=metrics, trace=trace.checkpoints, scaling=data.scaling,
                metadata=_metadata(cfg, "train"))
    print(f"trained {n}x{m} map ({n * m} units) for {metrics['total_steps']} steps")
    print(f"  quantization error    {q.quantization_error:.4f}")
    print(f"  topographic error     {q.topographic_error:.4f}")
    print(f"  embedding accuracy    {q.embedding_accuracy:.4f}")
    print(f"  convergence index     {q.convergence_index:.4f}")
    print(f"  malicious units       {raw.malicious_fraction:.1%}")
    return {"model": lm, "quality": q, "metrics": metrics}


def _check_features(model_doc, data):
    expected = model_doc["feature_names"]
    if data.feature_names != expected:
        missing = [f for f in expected if f not in data.feature_names]
        extra = [f for f in data.feature_names if f not in expected]
        raise DataError(f"feature mismatch between model and data: missing {missing}, "
                        f"unexpected {extra}")
    if model_doc.get("scaling") is not None:
        if [list(s) for s in data.scaling] != model_doc["scaling"]:
            raise DataError("dataset scaling differs from the model's training scaling")


def cmd_evaluate(cfg) -> dict:
    out = _out(cfg)
    lm, doc = read_model(out / "model.json")
    data, _ = read_dataset(out / "test.json")
    _check_features(doc, data)
    report = evaluate(lm, data)
    dump_json({**report.to_dict(), "num_samples": data.num_samples,
               "metadata": _metadata(cfg, "evaluate")}, out / "eval.json")
    print(report.table())
    return {"report": report}


def cmd_explain(cfg) -> dict:
    out = _out(cfg)
    lm, doc = read_model(out / "model.json")
    data, _ = read_dataset(out / f"{cfg.dataset}.json")
    _check_features(doc, data)
    samples = [int(s) for s in cfg.samples]
    bundle = explanation_bundle(lm, data, k=int(cfg.k), samples=samples, seed=int(cfg.seed))
    bundle_dir = write_bundle(bundle, out / "bundle", metadata=_metadata(cfg, "explain"))
    written = render_bundle(bundle_dir, colormap=cfg.colormap)
    print(f"wrote {len(written)} figures to {bundle_dir}")
    return {"bundle": bundle, "svgs": written}


def cmd_render(cfg) -> dict:
    bundle_dir = Path(cfg.out) / "bundle"
    if not (bundle_dir / "manifest.json").is_file():
        raise FileNotFoundError(f"no explanation bundle at {bundle_dir}; run explain first")
    written = render_bundle(bundle_dir, colormap=cfg.colormap)
    print(f"wrote {len(written)} figures to {bundle_dir}")
    return {"svgs": written}


def render_bundle(bundle_dir, colormap: str = "gray") -> list[Path]:
    """Render every SVG figure from the JSON files of a bundle directory."""
    bundle_dir = Path(bundle_dir)
    manifest = load_json(bundle_dir / "manifest.json", "somids.bundle")
    files = manifest["files"]
    written = []

    def emit(name, text):
        path = bundle_dir / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    um = load_json(bundle_dir / files["umatrix"])
    overlay = SimpleNamespace(segments=[tuple(s) for s in um["starburst"]["segments"]])
    emit("umatrix.svg", render_grid(um["values"], RenderSpec(title="Starburst U-Matrix",
                                                             colormap=colormap),
                                    overlay=overlay, labels=um["unit_labels"]))
    cl = load_json(bundle_dir / files["clusters"])
    emit("clusters.svg", render_grid(cl["cluster_of"], RenderSpec(
        title=f"K-means clustering (k={cl['k']})", colormap=colormap), labels=cl["unit_labels"]))
    stems = heatmap_files(manifest["feature_names"])
    for name, fname in files["heatmaps"].items():
        hm = load_json(bundle_dir / fname)
        emit(f"{stems[name]}.svg", render_grid(hm["values"], RenderSpec(
            title=f"{name} feature map", colormap=colormap), labels=None))
    sig = load_json(bundle_dir / files["significance"])
    entries = sorted(((e["feature"], e["significance"]) for e in sig["features"]),
                     key=lambda e: -e[1])
    emit("significance.svg", render_bars(entries, RenderSpec(
        title="Global feature significance", width=560,
        height=max(120, 28 * len(entries) + 60))))
    for sid, fname in files["local"].items():
        loc = load_json(bundle_dir / fname)
        entries = [(s["feature"], s["distance"]) for s in loc["scores"]]
        title = f"Sample {sid}: predicted {loc['predicted']} (distance to BMU)"
        emit(f"local_{safe_name(sid)}.svg", render_bars(entries, RenderSpec(
            title=title, width=560, height=max(120, 28 * len(entries) + 60)), marker="dot"))
    return written


COMMANDS = {
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "explain": cmd_explain,
    "render": cmd_render,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="somids", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with run settings")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("preprocess", parents=[common], help="load, clean, scale and select features")
    p.add_argument("--train", help="raw training CSV")
    p.add_argument("--test", help="raw test CSV (default: stratified split of --train)")
    p.add_argument("--schema", choices=SCHEMAS)
    p.add_argument("--threshold", type=float, help="significance cut-off (default 0.01)")
    p.add_argument("--subset", type=_positive_int, help="stratified training subset size")
    p.add_argument("--test-fraction", dest="test_fraction", type=float)

    p = sub.add_parser("train", parents=[common], help="train and label the map")
    p.add_argument("--map-size", dest="map_size", type=_map_size, help="grid shape, e.g. 18x18")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--steps", type=_positive_int, help="single-sample presentations")
    group.add_argument("--epochs", type=_positive_int, help="passes over the data")
    p.add_argument("--max-steps", dest="max_steps", type=_positive_int,
                   help="step cap when --epochs is used")
    p.add_argument("--lr0", type=float)
    p.add_argument("--radius0", type=float)

    sub.add_parser("evaluate", parents=[common], help="score the model on the test set")

    p = sub.add_parser("explain", parents=[common], help="write explanation bundle and figures")
    p.add_argument("--k", type=_positive_int, help="k-means cluster count (default 2)")
    p.add_argument("--samples", type=int, nargs="*", default=[], help="row ids to explain")
    p.add_argument("--dataset", choices=("train", "test"), help="rows to explain (default test)")
    p.add_argument("--colormap", choices=("gray", "heat"))

    p = sub.add_parser("render", parents=[common], help="re-render SVGs from an existing bundle")
    p.add_argument("--colormap", choices=("gray", "heat"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](cfg)
    except UsageError as exc:
        parser.error(str(exc))
    except (DataError, FormatError, ValueError, IndexError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
