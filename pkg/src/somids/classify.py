"""Binary anomaly classification from a labelled map.

Every training sample votes for its BMU; each unit takes the majority label
of its hits. Units that nobody hit inherit the label of the nearest labelled
unit in weight space, after which a test sample is classified by the label
of its BMU.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .som import SomMap, TrainConfig, best_matching_unit, bmus, init_map, pairwise_distances, train

UNLABELED = -1


@dataclass
class LabeledMap:
    som: SomMap
    unit_label: np.ndarray  # per unit: 0, 1 or UNLABELED
    hit_counts: np.ndarray  # (num_units, 2): benign hits, malicious hits

    @property
    def fully_labeled(self) -> bool:
        return bool(np.all(self.unit_label != UNLABELED))

    @property
    def malicious_fraction(self) -> float:
        """Share of units whose hit majority is malicious (before resolution)."""
        return float(np.mean(majority_labels(self.hit_counts) == 1))


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int
    f1: float
    precision: float
    recall: float
    fpr: float
    fnr: float

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        header = f"{'F1':>8} {'Precision':>10} {'Recall':>8} {'FPR':>8} {'FNR':>8}"
        row = (f"{self.f1:>8.1%} {self.precision:>10.1%} {self.recall:>8.1%} "
               f"{self.fpr:>8.1%} {self.fnr:>8.1%}")
        counts = f"TP={self.tp} FP={self.fp} TN={self.tn} FN={self.fn}"
        return "\n".join([header, row, counts])


def _ratio(num, den):
    return num / den if den else 0.0


def report_from_counts(tp: int, fp: int, tn: int, fn: int) -> EvalReport:
    """Derive the five rate metrics from confusion counts (0/0 -> 0)."""
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    return EvalReport(
        tp=int(tp), fp=int(fp), tn=int(tn), fn=int(fn),
        f1=_ratio(2 * precision * recall, precision + recall),
        precision=precision,
        recall=recall,
        fpr=_ratio(fp, fp + tn),
        fnr=_ratio(fn, fn + tp),
    )


def majority_labels(hit_counts, tie_label: int = 1) -> np.ndarray:
    benign, malicious = hit_counts[:, 0], hit_counts[:, 1]
    labels = np.full(len(hit_counts), UNLABELED, dtype=int)
    labels[malicious > benign] = 1
    labels[benign > malicious] = 0
    labels[(benign == malicious) & (benign > 0)] = tie_label
    return labels


def label_units(som: SomMap, train_data, labels=None, tie_label: int = 1) -> LabeledMap:
    """Majority-label each unit from the training samples it attracts.

    Args:
        som: trained map.
        train_data: a Dataset, or a feature matrix together with ``labels``.
        tie_label: label given to units with equal benign and malicious
            hits. Defaults to malicious so that ties raise an alert.
    """
    X = np.asarray(getattr(train_data, "features", train_data), dtype=float)
    y = np.asarray(getattr(train_data, "labels", labels))
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("training set is empty")
    if y is None or len(y) != len(X):
        raise ValueError("labels missing or of wrong length")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    idx, _ = bmus(som, X)
    hits = np.zeros((som.num_units, 2), dtype=int)
    np.add.at(hits, (idx, y.astype(int)), 1)
    return LabeledMap(som=som, unit_label=majority_labels(hits, tie_label), hit_counts=hits)


def resolve_unlabeled(lm: LabeledMap) -> LabeledMap:
    """Give each unlabeled unit the label of its nearest labeled unit."""
    labeled = np.flatnonzero(lm.unit_label != UNLABELED)
    if labeled.size == 0:
        raise ValueError("no labeled units to resolve from")
    missing = np.flatnonzero(lm.unit_label == UNLABELED)
    out = lm.unit_label.copy()
    if missing.size:
        D = pairwise_distances(lm.som.weights[missing], lm.som.weights[labeled])
        # argmin picks the first minimum; labeled is ascending so ties go to the lower index
        out[missing] = lm.unit_label[labeled[np.argmin(D, axis=1)]]
    return LabeledMap(som=lm.som, unit_label=out, hit_counts=lm.hit_counts)


def _require_full(lm):
    if not lm.fully_labeled:
        raise ValueError("map has unlabeled units; call resolve_unlabeled first")


def predict(lm: LabeledMap, sample) -> int:
    """Label of the sample's BMU."""
    _require_full(lm)
    u, _ = best_matching_unit(lm.som, sample)
    return int(lm.unit_label[u])


def predict_many(lm: LabeledMap, X) -> np.ndarray:
    _require_full(lm)
    idx, _ = bmus(lm.som, np.asarray(X, dtype=float))
    return lm.unit_label[idx]


def evaluate(lm: LabeledMap, test_data, labels=None) -> EvalReport:
    """Confusion counts and rates on a test set, malicious as the positive class."""
    X = np.asarray(getattr(test_data, "features", test_data), dtype=float)
    y = np.asarray(getattr(test_data, "labels", labels))
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("test set is empty")
    pred = predict_many(lm, X)
    tp = int(np.sum((pred == 1) & (y == 1)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    tn = int(np.sum((pred == 0) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    return report_from_counts(tp, fp, tn, fn)


class SOMClassifier(ClassifierMixin, BaseEstimator):
    """Self-organizing-map intrusion detector with a scikit-learn interface.

    Fits a map on ``X``, majority-labels its units from ``y`` and predicts
    by BMU lookup. Labels must be 0 (benign) / 1 (malicious).

    Parameters:
        n_rows, n_cols: grid shape; 18 x 18 by default.
        steps, epochs, max_steps: training length, see :class:`TrainConfig`.
        lr0, radius0: initial learning rate and neighbourhood radius.
        tie_label: label for units with equal benign and malicious hits.
        random_state: seed for initialisation and sample picking.
    """

    def __init__(self, n_rows=18, n_cols=18, steps=10_000, epochs=None, max_steps=200_000,
                 lr0=0.7, radius0=None, tie_label=1, random_state=0):
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.steps = steps
        self.epochs = epochs
        self.max_steps = max_steps
        self.lr0 = lr0
        self.radius0 = radius0
        self.tie_label = tie_label
        self.random_state = random_state

    def train_config(self) -> TrainConfig:
        seed = 0 if self.random_state is None else int(self.random_state)
        return TrainConfig(steps=self.steps, lr0=self.lr0, radius0=self.radius0, seed=seed,
                           epochs=self.epochs, max_steps=self.max_steps)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        check_classification_targets(y)
        y = y.astype(int)
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0 (benign) or 1 (malicious)")
        config = self.train_config()
        self.initial_som_ = init_map(self.n_rows, self.n_cols, X.shape[1], config.seed)
        som, self.trace_ = train(self.initial_som_, X, config)
        self.raw_labels_ = label_units(som, X, y, self.tie_label)
        self.labeled_map_ = resolve_unlabeled(self.raw_labels_)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "labeled_map_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return predict_many(self.labeled_map_, X)

    def evaluate(self, X, y) -> EvalReport:
        check_is_fitted(self, "labeled_map_")
        return evaluate(self.labeled_map_, check_array(X, dtype=float), np.asarray(y))

    @property
    def som_(self) -> SomMap:
        check_is_fitted(self, "labeled_map_")
        return self.labeled_map_.som
