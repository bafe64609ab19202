"""JSON file formats for processed datasets, models and explanation bundles.

Floats are written with Python's shortest round-trip repr, so reading a file
back reproduces every weight exactly.

Dataset (``<name>.json`` + sidecar ``<name>.csv``)::

    {"format": "somids.dataset", "version": 1, "feature_names": [...],
     "scaling": [[min, max], ...], "significance": [...] | null,
     "data_path": "<name>.csv", "num_samples": int, "source": str,
     "preprocessing": {...} | null, "metadata": {...}}

The sidecar CSV has one column per feature plus a trailing ``label`` column.

Model (``model.json``)::

    {"format": "somids.model", "version": 1, "n": rows, "m": cols, "dim": N,
     "feature_names": [...], "weights": [[...], ...]  (row-major units),
     "unit_labels": [...], "hit_counts": [[benign, malicious], ...],
     "train_config": {...}, "final_metrics": {...}, "trace": [...],
     "metadata": {...}}

Explanation bundle (directory)::

    manifest.json, umatrix.json, clusters.json, significance.json,
    heatmap_<feature>.json (one per feature), local_<sample-id>.json
"""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

from . import __version__
from .classify import LabeledMap
from .explain import ExplanationBundle, LocalExplanation
from .ingest import Dataset
from .som import SomMap

FORMAT_VERSION = 1


class FormatError(ValueError):
    """Raised when a file does not match the expected document layout."""


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(_plain(obj), indent=1) + "\n", encoding="utf-8")


def load_json(path, fmt: str | None = None) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if fmt is not None:
        if doc.get("format") != fmt:
            raise FormatError(f"{path}: expected a {fmt} document, found {doc.get('format')!r}")
        if doc.get("version") != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {doc.get('version')!r}")
    return doc


def run_metadata(**extra) -> dict:
    return {"package_version": __version__, **extra}


# --------------------------------------------------------------------------
# datasets


def write_dataset(data: Dataset, path, preprocessing=None, metadata=None) -> Path:
    path = Path(path)
    csv_path = path.with_suffix(".csv")
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(data.feature_names) + ["label"])
        for row, label in zip(data.features.tolist(), data.labels.tolist()):
            writer.writerow([repr(v) for v in row] + [label])
    doc = {
        "format": "somids.dataset",
        "version": FORMAT_VERSION,
        "feature_names": data.feature_names,
        "scaling": [list(s) for s in data.scaling],
        "significance": None if data.significance is None else data.significance,
        "data_path": csv_path.name,
        "num_samples": data.num_samples,
        "source": data.source,
        "preprocessing": preprocessing,
        "metadata": metadata or run_metadata(),
    }
    dump_json(doc, path)
    return path


def read_dataset(path) -> tuple[Dataset, dict]:
    path = Path(path)
    doc = load_json(path, "somids.dataset")
    csv_path = path.parent / doc["data_path"]
    with csv_path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    if header[:-1] != doc["feature_names"] or header[-1] != "label":
        raise FormatError(f"{csv_path}: header does not match {path.name}")
    dim = len(doc["feature_names"])
    if rows:
        arr = np.asarray(rows, dtype=object)
        features = arr[:, :dim].astype(float)
        labels = arr[:, dim].astype(int)
    else:
        features, labels = np.zeros((0, dim)), np.zeros(0, dtype=int)
    data = Dataset(
        features=features,
        labels=labels,
        feature_names=list(doc["feature_names"]),
        scaling=[tuple(s) for s in doc["scaling"]],
        significance=doc["significance"],
        source=doc.get("source", "generic"),
    )
    return data, doc


# --------------------------------------------------------------------------
# models


def write_model(lm: LabeledMap, path, feature_names, train_config=None, final_metrics=None,
                trace=None, scaling=None, metadata=None) -> Path:
    som = lm.som
    doc = {
        "format": "somids.model",
        "version": FORMAT_VERSION,
        "n": som.rows,
        "m": som.cols,
        "dim": som.dim,
        "feature_names": list(feature_names),
        "scaling": None if scaling is None else [list(s) for s in scaling],
        "weights": som.weights,
        "unit_labels": lm.unit_label,
        "hit_counts": lm.hit_counts,
        "train_config": train_config or {},
        "final_metrics": final_metrics or {},
        "trace": [list(c) for c in (trace or [])],
        "metadata": metadata or run_metadata(),
    }
    dump_json(doc, path)
    return Path(path)


def read_model(path) -> tuple[LabeledMap, dict]:
    doc = load_json(path, "somids.model")
    weights = np.asarray(doc["weights"], dtype=float).reshape(doc["n"] * doc["m"], doc["dim"])
    som = SomMap(doc["n"], doc["m"], weights)
    lm = LabeledMap(
        som=som,
        unit_label=np.asarray(doc["unit_labels"], dtype=int),
        hit_counts=np.asarray(doc["hit_counts"], dtype=int).reshape(-1, 2),
    )
    return lm, doc


# --------------------------------------------------------------------------
# explanation bundles


def safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", name).strip("_") or "feature"


def heatmap_files(feature_names) -> dict[str, str]:
    """Map each feature to a unique file stem ``heatmap_<feature>``."""
    out, used = {}, set()
    for i, name in enumerate(feature_names):
        stem = f"heatmap_{safe_name(name)}"
        if stem in used:
            stem = f"{stem}_{i}"
        used.add(stem)
        out[name] = stem
    return out


def _local_doc(sample_id, exp: LocalExplanation):
    return {
        "sample_id": sample_id,
        "bmu": exp.bmu,
        "predicted": exp.predicted,
        "scores": [{"feature": f, "distance": d} for f, d in exp.scores],
    }


def write_bundle(bundle: ExplanationBundle, out_dir, metadata=None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    heat = heatmap_files(bundle.feature_names)
    files = {
        "umatrix": "umatrix.json",
        "clusters": "clusters.json",
        "significance": "significance.json",
        "heatmaps": {name: f"{stem}.json" for name, stem in heat.items()},
        "local": {sid: f"local_{safe_name(sid)}.json" for sid in bundle.local},
    }
    dump_json({
        "rows": bundle.rows,
        "cols": bundle.cols,
        "values": bundle.umatrix,
        "unit_labels": bundle.unit_labels,
        "starburst": {
            "centers": bundle.overlay.centers,
            "segments": bundle.overlay.segments,
            "basin": bundle.overlay.basin.reshape(bundle.rows, bundle.cols),
        },
    }, out / files["umatrix"])
    dump_json({
        "k": bundle.clusters.k,
        "cluster_of": bundle.clusters.cluster_of.reshape(bundle.rows, bundle.cols),
        "centroids": bundle.clusters.centroids,
        "inertia_history": bundle.clusters.inertia_history,
        "unit_labels": bundle.unit_labels,
    }, out / files["clusters"])
    dump_json({
        "method": "relative-variance",
        "features": [{"feature": n, "significance": float(v)}
                     for n, v in zip(bundle.feature_names, bundle.significance)],
    }, out / files["significance"])
    for name, grid in bundle.heatmaps.items():
        dump_json({"feature": name, "rows": bundle.rows, "cols": bundle.cols, "values": grid},
                  out / files["heatmaps"][name])
    for sid, exp in bundle.local.items():
        dump_json(_local_doc(sid, exp), out / files["local"][sid])
    dump_json({
        "format": "somids.bundle",
        "version": FORMAT_VERSION,
        "rows": bundle.rows,
        "cols": bundle.cols,
        "feature_names": bundle.feature_names,
        "files": files,
        "metadata": metadata or run_metadata(),
    }, out / "manifest.json")
    return out
