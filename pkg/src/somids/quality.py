"""Map quality measures used to decide whether a trained map is usable."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy import stats

from .som import SomMap, bmu_pairs, bmus


@dataclass(frozen=True)
class QualityReport:
    quantization_error: float
    topographic_error: float
    topographic_accuracy: float
    embedding_accuracy: float
    convergence_index: float
    confidence: float = 0.95

    def to_dict(self) -> dict:
        return asdict(self)


def _matrix(data):
    X = np.asarray(getattr(data, "features", data), dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("dataset is empty")
    return X


def quantization_error(som: SomMap, data) -> float:
    """Mean Euclidean distance from each sample to its BMU."""
    X = _matrix(data)
    return float(bmus(som, X)[1].mean())


def grid_adjacent(som: SomMap, a, b):
    """True where units ``a`` and ``b`` are 4-neighbours on the grid."""
    ra, ca = np.divmod(np.asarray(a), som.cols)
    rb, cb = np.divmod(np.asarray(b), som.cols)
    return (np.abs(ra - rb) + np.abs(ca - cb)) == 1


def topographic_error(som: SomMap, data) -> float:
    """Fraction of samples whose BMU and second BMU are not grid 4-neighbours."""
    if som.num_units < 2:
        raise ValueError("topographic error needs a map with at least 2 units")
    X = _matrix(data)
    first, second = bmu_pairs(som, X)
    return float(np.mean(~grid_adjacent(som, first, second)))


def _means_agree(a, b, alpha):
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0 and vb == 0:
        return bool(ma == mb)
    res = stats.ttest_ind(a, b, equal_var=False)
    return bool(res.pvalue > alpha)


def _variances_agree(a, b, alpha):
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0 or vb == 0:
        return bool(va == vb)
    ratio = va / vb
    dist = stats.f(len(a) - 1, len(b) - 1)
    pvalue = 2.0 * min(dist.cdf(ratio), dist.sf(ratio))
    return bool(pvalue > alpha)


def embedding_accuracy(som: SomMap, data, confidence: float = 0.95) -> float:
    """Fraction of features whose unit weights match the data distribution.

    A feature counts as embedded when a Welch two-sample t test on the
    means and a two-sided F test on the variances both fail to reject at
    significance ``1 - confidence``.
    """
    X = _matrix(data)
    if X.shape[0] < 2 or som.num_units < 2:
        raise ValueError("embedding accuracy needs at least 2 samples and 2 units")
    if X.shape[1] != som.dim:
        raise ValueError(f"data has {X.shape[1]} features, map expects {som.dim}")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    alpha = 1.0 - confidence
    embedded = 0
    for f in range(som.dim):
        a, b = X[:, f], som.weights[:, f]
        if _means_agree(a, b, alpha) and _variances_agree(a, b, alpha):
            embedded += 1
    return embedded / som.dim


def convergence_index(ea: float, ta: float) -> float:
    """Equal-weight average of embedding accuracy and topographic accuracy."""
    for name, v in (("embedding accuracy", ea), ("topographic accuracy", ta)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    return (ea + ta) / 2


def quality_report(som: SomMap, data, confidence: float = 0.95) -> QualityReport:
    qe = quantization_error(som, data)
    te = topographic_error(som, data) if som.num_units >= 2 else 0.0
    ta = 1.0 - te
    X = _matrix(data)
    if X.shape[0] >= 2 and som.num_units >= 2:
        ea = embedding_accuracy(som, X, confidence)
    else:
        ea = 0.0
    return QualityReport(
        quantization_error=qe,
        topographic_error=te,
        topographic_accuracy=ta,
        embedding_accuracy=ea,
        convergence_index=convergence_index(ea, ta),
        confidence=confidence,
    )
