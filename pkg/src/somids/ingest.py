"""Loading and preprocessing of network-flow datasets.

Raw CSV files are read into a column-oriented :class:`RawTable`, labels are
collapsed to benign (0) / malicious (1), categorical columns are one-hot
encoded, non-finite values are repaired, and every feature is min-max scaled
into ``[0, 1]``. The resulting :class:`Dataset` is what the map trains on.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_array, check_is_fitted

logger = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
LABEL = "label"

SCHEMAS = ("nsl-kdd", "cic-ids-2017", "generic")

NSL_KDD_FEATURES = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins",
    "logged_in", "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files",
    "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate",
    "srv_rerror_rate", "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate",
    "dst_host_count", "dst_host_srv_count", "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate", "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
)
NSL_KDD_CATEGORICAL = ("protocol_type", "service", "flag")
NSL_KDD_LABEL = "label"
NSL_KDD_DIFFICULTY = "difficulty"

NSL_KDD_ATTACKS = frozenset({
    # training split
    "back", "buffer_overflow", "ftp_write", "guess_passwd", "imap", "ipsweep",
    "land", "loadmodule", "multihop", "neptune", "nmap", "perl", "phf", "pod",
    "portsweep", "rootkit", "satan", "smurf", "spy", "teardrop",
    "warezclient", "warezmaster",
    # attacks that only occur in the test split
    "apache2", "httptunnel", "mailbomb", "mscan", "named", "processtable",
    "ps", "saint", "sendmail", "snmpgetattack", "snmpguess", "sqlattack",
    "udpstorm", "worm", "xlock", "xsnoop", "xterm",
})

CIC_LABEL = "Label"
# Columns every CIC-IDS-2017 flow file carries; used to recognise the layout.
CIC_REQUIRED = ("Flow Duration", "Flow Bytes/s", "Flow Packets/s", CIC_LABEL)
CIC_ATTACKS = frozenset({
    "ddos", "dos hulk", "dos goldeneye", "dos slowloris", "dos slowhttptest",
    "portscan", "ftp-patator", "ssh-patator", "bot", "infiltration",
    "heartbleed",
})

_GENERIC_BENIGN = frozenset({"0", "0.0", "benign", "normal"})
_GENERIC_MALICIOUS = frozenset({"1", "1.0", "malicious", "attack", "anomaly"})


class DataError(ValueError):
    """Raised when input data violates the loader or preprocessing contract."""


@dataclass
class RawTable:
    """Column-oriented table as read from disk.

    ``data`` maps each column name to a 1-d array: float64 for numeric
    columns, object (str) for categorical columns and for the label until
    :func:`binarize_labels` rewrites it to int.
    """

    columns: list[tuple[str, str]]
    data: dict[str, np.ndarray]
    source: str = "generic"
    categories: dict[str, list[str]] = field(default_factory=dict)
    replacements: dict[str, dict[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        names = [name for name, _ in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names")
        labels = [name for name, kind in self.columns if kind == LABEL]
        if len(labels) != 1:
            raise DataError(f"expected exactly one label column, found {len(labels)}")
        lengths = {len(self.data[name]) for name in names}
        if len(lengths) > 1:
            raise DataError("columns have unequal lengths")

    @property
    def label_name(self) -> str:
        return next(name for name, kind in self.columns if kind == LABEL)

    @property
    def feature_columns(self) -> list[tuple[str, str]]:
        return [(name, kind) for name, kind in self.columns if kind != LABEL]

    @property
    def num_rows(self) -> int:
        return len(self.data[self.columns[0][0]])

    def take(self, indices) -> RawTable:
        """Row subset, preserving column kinds and metadata."""
        indices = np.asarray(indices, dtype=int)
        data = {name: values[indices] for name, values in self.data.items()}
        return replace(self, data=data)

    def concat(self, other: RawTable) -> RawTable:
        """Rows of ``self`` followed by rows of ``other`` (same columns required)."""
        if other.columns != self.columns:
            raise DataError("cannot concatenate tables with different columns")
        data = {name: np.concatenate([self.data[name], other.data[name]]) for name in self.data}
        return replace(self, data=data)


@dataclass
class Dataset:
    """Normalized feature matrix with binary labels.

    Attributes:
        features: ``(num_samples, N)`` array with every value in ``[0, 1]``.
        labels: ``(num_samples,)`` int array, 0 = benign, 1 = malicious.
        feature_names: one name per column of ``features``.
        scaling: per-feature ``(min, max)`` taken from the training table.
        significance: optional per-feature significance values.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str]
    scaling: list[tuple[float, float]]
    significance: np.ndarray | None = None
    source: str = "generic"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        n, dim = self.features.shape
        if len(self.labels) != n:
            raise DataError(f"{len(self.labels)} labels for {n} samples")
        if len(self.feature_names) != dim or len(self.scaling) != dim:
            raise DataError("feature_names / scaling length does not match feature count")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain non-finite values")
        if n and (self.features.min() < 0.0 or self.features.max() > 1.0):
            raise DataError("features must lie in [0, 1]")
        if not np.isin(self.labels, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        if self.significance is not None:
            self.significance = np.asarray(self.significance, dtype=float)

    @property
    def num_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SignificanceVector:
    values: np.ndarray
    method: str = "relative-variance"


# --------------------------------------------------------------------------
# loading


def _dedupe(names):
    seen: dict[str, int] = {}
    out = []
    for name in names:
        if name in seen:
            seen[name] += 1
            out.append(f"{name}.{seen[name]}")
        else:
            seen[name] = 0
            out.append(name)
    return out


def _schema_columns(schema, header):
    """Resolve column names/kinds and whether the first row is a header."""
    stripped = [h.strip() for h in header]
    if schema == "nsl-kdd":
        expected = list(NSL_KDD_FEATURES) + [NSL_KDD_LABEL]
        lowered = [h.lower() for h in stripped]
        if lowered[:41] == list(NSL_KDD_FEATURES):
            names = expected + ([NSL_KDD_DIFFICULTY] if len(stripped) == 43 else [])
            if len(stripped) not in (42, 43):
                raise DataError(f"NSL-KDD header has {len(stripped)} columns, expected 42 or 43")
            has_header = True
        elif len(stripped) in (42, 43) and not _is_number(stripped[1]):
            # the public KDDTrain+/KDDTest+ files ship without a header row
            names = expected + ([NSL_KDD_DIFFICULTY] if len(stripped) == 43 else [])
            has_header = False
        else:
            raise DataError("header does not match the NSL-KDD layout")
        kinds = []
        for name in names:
            if name in NSL_KDD_CATEGORICAL:
                kinds.append(CATEGORICAL)
            elif name == NSL_KDD_LABEL:
                kinds.append(LABEL)
            elif name == NSL_KDD_DIFFICULTY:
                kinds.append(None)  # dropped
            else:
                kinds.append(NUMERIC)
        return names, kinds, has_header

    names = _dedupe(stripped)
    if schema == "cic-ids-2017":
        missing = [c for c in CIC_REQUIRED if c not in names]
        if missing:
            raise DataError(f"header does not match the CIC-IDS-2017 layout; missing {missing}")
        kinds = [LABEL if n == CIC_LABEL else NUMERIC for n in names]
        return names, kinds, True

    if schema == "generic":
        lowered = [n.lower() for n in names]
        label_idx = lowered.index("label") if "label" in lowered else len(names) - 1
        kinds = [LABEL if i == label_idx else None for i in range(len(names))]
        return names, kinds, True

    raise DataError(f"unknown schema {schema!r}; expected one of {SCHEMAS}")


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def _parse_numeric(values, name, first_line):
    cleaned = [v.strip() for v in values]
    cleaned = ["nan" if v == "" else v for v in cleaned]
    try:
        return np.asarray(cleaned, dtype=float)
    except ValueError:
        for i, token in enumerate(cleaned):
            if not _is_number(token):
                raise DataError(
                    f"row {first_line + i}: non-numeric value {token!r} in column {name!r}"
                ) from None
        raise


def load_csv(path, schema: str = "generic") -> RawTable:
    """Read a CSV file into a :class:`RawTable`.

    Args:
        path: CSV file. NSL-KDD files may omit the header row.
        schema: one of ``"nsl-kdd"``, ``"cic-ids-2017"`` or ``"generic"``.

    Raises:
        FileNotFoundError: if ``path`` does not exist.
        DataError: on a header mismatch or an unparseable row; row numbers
            are 1-based file line numbers.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8", errors="replace") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]  # tolerate trailing blank lines
    if not rows:
        raise DataError(f"{path}: empty file (no header)")

    names, kinds, has_header = _schema_columns(schema, rows[0])
    body = rows[1:] if has_header else rows
    first_line = 2 if has_header else 1
    width = len(names)
    for i, row in enumerate(body):
        if len(row) != width:
            raise DataError(f"row {first_line + i}: expected {width} values, got {len(row)}")

    cols = list(zip(*body)) if body else [() for _ in names]
    columns, data = [], {}
    for name, kind, values in zip(names, kinds, cols):
        if schema == "generic" and kind is None:
            stripped = [v.strip() for v in values]
            kind = NUMERIC if all(_is_number(v) or v == "" for v in stripped) else CATEGORICAL
        if kind is None:
            continue
        if kind == NUMERIC:
            data[name] = _parse_numeric(values, name, first_line)
        else:
            data[name] = np.asarray([v.strip() for v in values], dtype=object)
        columns.append((name, kind))
    return RawTable(columns=columns, data=data, source=schema)


# --------------------------------------------------------------------------
# table transformations


def _binary_label(value: str, source: str) -> int:
    token = str(value).strip()
    if source == "nsl-kdd":
        token = token.rstrip(".").lower()
        if token == "normal":
            return 0
        if token in NSL_KDD_ATTACKS:
            return 1
    elif source == "cic-ids-2017":
        lowered = token.lower()
        if lowered == "benign":
            return 0
        # the public files mangle the dash in "Web Attack - XSS" etc.
        if lowered in CIC_ATTACKS or lowered.startswith("web attack"):
            return 1
    else:
        lowered = token.lower()
        if lowered in _GENERIC_BENIGN:
            return 0
        if lowered in _GENERIC_MALICIOUS:
            return 1
    raise DataError(f"unrecognized label {value!r} for schema {source!r}")


def binarize_labels(table: RawTable) -> RawTable:
    """Rewrite the label column to 0 (benign) / 1 (malicious)."""
    name = table.label_name
    values = table.data[name]
    if values.dtype.kind in "iu" and np.isin(values, (0, 1)).all():
        return table
    cache: dict = {}
    out = np.empty(len(values), dtype=np.int64)
    for i, v in enumerate(values):
        if v not in cache:
            cache[v] = _binary_label(v, table.source)
        out[i] = cache[v]
    data = dict(table.data)
    data[name] = out
    return replace(table, data=data)


def encode_categoricals(table: RawTable, categories: dict[str, list[str]] | None = None) -> RawTable:
    """One-hot encode categorical columns as ``<col>=<value>`` indicators.

    The vocabulary is learned from ``table`` unless ``categories`` is given
    (test time); values outside the vocabulary encode as all zeros.
    """
    vocab = {}
    columns, data = [], {}
    for name, kind in table.columns:
        if kind != CATEGORICAL:
            columns.append((name, kind))
            data[name] = table.data[name]
            continue
        values = table.data[name]
        if categories is not None and name in categories:
            levels = list(categories[name])
        else:
            levels = sorted({str(v) for v in values})
        vocab[name] = levels
        for level in levels:
            col = f"{name}={level}"
            columns.append((col, NUMERIC))
            data[col] = (values == level).astype(float)
    return replace(table, columns=columns, data=data, categories=vocab)


def sanitize(table: RawTable) -> RawTable:
    """Repair non-finite numeric values in place of dropping rows.

    NaN becomes 0, +inf the column's finite maximum and -inf its finite
    minimum. Per-column replacement counts land in ``table.replacements``.

    Raises:
        DataError: if a non-empty column has no finite value at all.
    """
    data = dict(table.data)
    report = {}
    for name, kind in table.columns:
        if kind != NUMERIC:
            continue
        col = data[name]
        finite = np.isfinite(col)
        if finite.all():
            continue
        if not finite.any():
            raise DataError(f"column {name!r} is entirely non-finite")
        nan = np.isnan(col)
        pos = np.isposinf(col)
        neg = np.isneginf(col)
        col = col.copy()
        col[nan] = 0.0
        col[pos] = col[finite].max()
        col[neg] = col[finite].min()
        data[name] = col
        report[name] = {"nan": int(nan.sum()), "posinf": int(pos.sum()), "neginf": int(neg.sum())}
        logger.info("sanitized %s: %s", name, report[name])
    merged = {**table.replacements, **report}
    return replace(table, data=data, replacements=merged)


# --------------------------------------------------------------------------
# scaling and significance


class MinMaxClampScaler(TransformerMixin, BaseEstimator):
    """Min-max scaler that maps constant columns to 0 and clamps to [0, 1].

    Unlike :class:`sklearn.preprocessing.MinMaxScaler`, values seen outside
    the fitted range are clipped, so transformed test data always satisfies
    the map's ``[0, 1]`` input contract.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=float, ensure_min_samples=1)
        self.data_min_ = X.min(axis=0)
        self.data_max_ = X.max(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    @classmethod
    def from_scaling(cls, scaling):
        scaler = cls()
        arr = np.asarray(scaling, dtype=float).reshape(-1, 2)
        scaler.data_min_ = arr[:, 0].copy()
        scaler.data_max_ = arr[:, 1].copy()
        scaler.n_features_in_ = arr.shape[0]
        return scaler

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        X = check_array(X, dtype=float, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise DataError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        span = self.data_max_ - self.data_min_
        constant = span == 0
        safe = np.where(constant, 1.0, span)
        out = (X - self.data_min_) / safe
        out[:, constant] = 0.0
        return np.clip(out, 0.0, 1.0)

    @property
    def scaling_(self):
        return [(float(lo), float(hi)) for lo, hi in zip(self.data_min_, self.data_max_)]


def normalize(table: RawTable, scaling=None) -> Dataset:
    """Min-max scale every feature column of ``table`` into a Dataset.

    Args:
        table: all feature columns numeric and finite, labels binarized.
        scaling: per-feature ``(min, max)`` from a training table. When
            omitted the range is computed from ``table`` itself.
    """
    feats = table.feature_columns
    bad = [name for name, kind in feats if kind != NUMERIC]
    if bad:
        raise DataError(f"non-numeric feature columns remain: {bad}")
    labels = table.data[table.label_name]
    if labels.dtype.kind not in "iu":
        raise DataError("labels must be binarized before normalization")
    names = [name for name, _ in feats]
    if names:
        X = np.column_stack([table.data[n] for n in names]).astype(float)
    else:
        X = np.zeros((table.num_rows, 0))
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite feature values; run sanitize first")
    if scaling is None:
        if X.shape[0] == 0:
            raise DataError("cannot fit scaling on an empty table")
        scaler = MinMaxClampScaler().fit(X)
    else:
        scaler = MinMaxClampScaler.from_scaling(scaling)
    return Dataset(
        features=scaler.transform(X),
        labels=labels,
        feature_names=names,
        scaling=scaler.scaling_,
        source=table.source,
    )


def _relative_variance(X):
    var = np.var(X, axis=0, ddof=1)
    top = var.max() if var.size else 0.0
    if top <= 0:
        return np.zeros_like(var)
    return np.clip(var / top, 0.0, 1.0)


def feature_significance(data: Dataset) -> SignificanceVector:
    """Per-feature variance relative to the largest feature variance.

    The most variable feature scores 1 and constant features score 0.
    """
    if data.num_samples < 2:
        raise DataError("feature significance needs at least 2 samples")
    return SignificanceVector(values=_relative_variance(data.features))


def select_features(data: Dataset, sig: SignificanceVector, threshold: float) -> Dataset:
    """Keep the features whose significance strictly exceeds ``threshold``."""
    values = np.asarray(getattr(sig, "values", sig), dtype=float)
    if len(values) != data.dim:
        raise DataError(f"significance has {len(values)} entries for {data.dim} features")
    keep = np.flatnonzero(values > threshold)
    if keep.size == 0:
        raise DataError(f"no features selected: none has significance above {threshold}")
    return Dataset(
        features=data.features[:, keep],
        labels=data.labels,
        feature_names=[data.feature_names[i] for i in keep],
        scaling=[data.scaling[i] for i in keep],
        significance=values[keep],
        source=data.source,
    )


class SignificanceSelector(SelectorMixin, BaseEstimator):
    """Feature selector keeping columns whose relative variance exceeds a threshold.

    Parameters:
        threshold: significance cut-off in ``[0, 1]``; features must be
            strictly above it to survive.
    """

    def __init__(self, threshold=0.01):
        self.threshold = threshold

    def fit(self, X, y=None):
        X = check_array(X, dtype=float, ensure_min_samples=2)
        self.significance_ = _relative_variance(X)
        self.n_features_in_ = X.shape[1]
        if not np.any(self.significance_ > self.threshold):
            raise DataError(f"no features selected: none has significance above {self.threshold}")
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "significance_")
        return self.significance_ > self.threshold


class FlowPreprocessor(BaseEstimator):
    """Fitted preprocessing chain for a train/test pair of raw tables.

    ``fit`` learns the categorical vocabulary, scaling and selected feature
    subset from the training table; ``transform`` replays them on any other
    table of the same schema.
    """

    def __init__(self, threshold: float = 0.01):
        self.threshold = threshold

    def fit_transform(self, table: RawTable) -> Dataset:
        table = sanitize(encode_categoricals(binarize_labels(table)))
        full = normalize(table)
        sig = feature_significance(full)
        selected = select_features(full, sig, self.threshold)
        self.categories_ = table.categories
        self.all_features_ = full.feature_names
        self.all_scaling_ = full.scaling
        self.significance_ = sig.values
        self.selected_ = list(selected.feature_names)
        self.replacements_ = table.replacements
        return selected

    def fit(self, table: RawTable) -> FlowPreprocessor:
        self.fit_transform(table)
        return self

    def transform(self, table: RawTable) -> Dataset:
        if not hasattr(self, "selected_"):
            raise DataError("preprocessor is not fitted")
        table = sanitize(encode_categoricals(binarize_labels(table), self.categories_))
        names = [n for n, _ in table.feature_columns]
        if names != self.all_features_:
            missing = sorted(set(self.all_features_) - set(names))
            extra = sorted(set(names) - set(self.all_features_))
            raise DataError(f"feature mismatch: missing {missing}, unexpected {extra}")
        full = normalize(table, scaling=self.all_scaling_)
        index = {n: i for i, n in enumerate(full.feature_names)}
        keep = [index[n] for n in self.selected_]
        return Dataset(
            features=full.features[:, keep],
            labels=full.labels,
            feature_names=list(self.selected_),
            scaling=[full.scaling[i] for i in keep],
            significance=self.significance_[keep],
            source=table.source,
        )

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "categories": self.categories_,
            "all_features": self.all_features_,
            "all_scaling": [list(s) for s in self.all_scaling_],
            "significance": [float(v) for v in self.significance_],
            "selected": self.selected_,
        }

    @classmethod
    def from_dict(cls, state: dict) -> FlowPreprocessor:
        pre = cls(threshold=state["threshold"])
        pre.categories_ = {k: list(v) for k, v in state["categories"].items()}
        pre.all_features_ = list(state["all_features"])
        pre.all_scaling_ = [tuple(s) for s in state["all_scaling"]]
        pre.significance_ = np.asarray(state["significance"], dtype=float)
        pre.selected_ = list(state["selected"])
        pre.replacements_ = {}
        return pre


def stratified_subset(labels, size: int, seed: int) -> np.ndarray:
    """Sorted indices of a class-stratified random subset of ``size`` rows."""
    labels = np.asarray(labels)
    if size >= len(labels):
        return np.arange(len(labels))
    rng = np.random.default_rng(seed)
    picked = []
    classes, counts = np.unique(labels, return_counts=True)
    quotas = np.floor(counts / counts.sum() * size).astype(int)
    # hand leftover slots to the largest remainders
    rem = counts / counts.sum() * size - quotas
    for i in np.argsort(-rem, kind="stable")[: size - quotas.sum()]:
        quotas[i] += 1
    for cls, quota in zip(classes, quotas):
        idx = np.flatnonzero(labels == cls)
        picked.append(rng.choice(idx, size=quota, replace=False))
    return np.sort(np.concatenate(picked))


def stratified_split(labels, test_fraction: float, seed: int):
    """Stratified (train_idx, test_idx) split."""
    labels = np.asarray(labels)
    n_test = int(round(len(labels) * test_fraction))
    test = stratified_subset(labels, n_test, seed)
    mask = np.ones(len(labels), dtype=bool)
    mask[test] = False
    return np.flatnonzero(mask), test
