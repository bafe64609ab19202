"""Global and local explanations mined from a trained, labelled map."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classify import LabeledMap, UNLABELED
from .ingest import feature_significance, Dataset
from .som import SomMap, best_matching_unit

_OFFSETS_4 = ((-1, 0), (0, -1), (0, 1), (1, 0))
_OFFSETS_8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def _neighbours(rows, cols, r, c, offsets=_OFFSETS_4):
    for dr, dc in offsets:
        rr, cc = r + dr, c + dc
        if 0 <= rr < rows and 0 <= cc < cols:
            yield rr, cc


def u_matrix(som: SomMap, neighbourhood: int = 4) -> np.ndarray:
    """``(rows, cols)`` grid of mean weight distance to each grid neighbour.

    Args:
        neighbourhood: 4 (edge-sharing neighbours) or 8 (adds diagonals).
    """
    if neighbourhood not in (4, 8):
        raise ValueError("neighbourhood must be 4 or 8")
    offsets = _OFFSETS_4 if neighbourhood == 4 else _OFFSETS_8
    W = som.weights.reshape(som.rows, som.cols, som.dim)
    total = np.zeros((som.rows, som.cols))
    count = np.zeros((som.rows, som.cols))
    for dr, dc in offsets:
        # slice pairs (a, b) such that b is a's neighbour at offset (dr, dc)
        ar = slice(max(0, -dr), som.rows - max(0, dr))
        ac = slice(max(0, -dc), som.cols - max(0, dc))
        br = slice(max(0, dr), som.rows - max(0, -dr))
        bc = slice(max(0, dc), som.cols - max(0, -dc))
        d = np.sqrt(np.sum((W[ar, ac] - W[br, bc]) ** 2, axis=2))
        total[ar, ac] += d
        count[ar, ac] += 1
    return np.divide(total, count, out=np.zeros_like(total), where=count > 0)


@dataclass
class StarburstOverlay:
    """Steepest-descent paths over a U-Matrix.

    ``parent[u]`` is the unit that ``u`` steps to, or ``u`` itself for a
    centre. ``segments`` holds one ``(u, parent[u])`` pair per non-centre
    unit; ``basin[u]`` is the centre that ``u``'s path ends at.
    """

    parent: np.ndarray
    basin: np.ndarray
    centers: list[int]
    segments: list[tuple[int, int]]


def starburst(um) -> StarburstOverlay:
    """Trace each unit downhill to a local minimum of the U-Matrix.

    A unit steps to its lowest-valued 4-neighbour while that neighbour is
    strictly lower; ties between neighbours go to the lowest unit index.
    """
    um = np.asarray(um, dtype=float)
    rows, cols = um.shape
    n = rows * cols
    flat = um.ravel()
    parent = np.arange(n)
    for u in range(n):
        r, c = divmod(u, cols)
        best, best_val = u, flat[u]
        for rr, cc in sorted(_neighbours(rows, cols, r, c), key=lambda p: p[0] * cols + p[1]):
            v = rr * cols + cc
            if flat[v] < best_val:
                best, best_val = v, flat[v]
        parent[u] = best
    basin = parent.copy()
    # paths strictly decrease, so pointer jumping terminates
    while True:
        nxt = parent[basin]
        if np.array_equal(nxt, basin):
            break
        basin = nxt
    centers = [int(u) for u in range(n) if parent[u] == u]
    segments = [(int(u), int(parent[u])) for u in range(n) if parent[u] != u]
    return StarburstOverlay(parent=parent, basin=basin, centers=centers, segments=segments)


@dataclass
class ClusterAssignment:
    cluster_of: np.ndarray
    k: int
    centroids: np.ndarray
    inertia_history: list[float] = field(default_factory=list)

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1] if self.inertia_history else 0.0


def _sq_dists(X, C):
    return np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2)


def _kmeans_pp(X, k, rng):
    centers = [X[rng.integers(len(X))]]
    for _ in range(1, k):
        d2 = _sq_dists(X, np.array(centers)).min(axis=1)
        total = d2.sum()
        if total <= 0:
            # every point already coincides with a centre
            centers.append(X[rng.integers(len(X))])
            continue
        centers.append(X[rng.choice(len(X), p=d2 / total)])
    return np.array(centers)


def kmeans_units(som: SomMap, k: int = 2, seed: int = 0, max_iter: int = 100) -> ClusterAssignment:
    """Lloyd's k-means over the unit weight vectors.

    Seeded k-means++ start; an emptied cluster is reseeded at the point
    farthest from its current centroid. Stops at an assignment fixpoint or
    after ``max_iter`` rounds.
    """
    X = som.weights
    n = len(X)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    if k == n:
        return ClusterAssignment(np.arange(n), k, X.copy(), [0.0])
    C = _kmeans_pp(X, k, rng)
    assign = np.argmin(_sq_dists(X, C), axis=1)
    history = []
    for _ in range(max_iter):
        for j in range(k):
            members = assign == j
            if members.any():
                C[j] = X[members].mean(axis=0)
            else:
                d2 = _sq_dists(X, C)[np.arange(n), assign]
                far = int(np.argmax(d2))
                C[j] = X[far]
                assign[far] = j
        history.append(float(_sq_dists(X, C)[np.arange(n), assign].sum()))
        new = np.argmin(_sq_dists(X, C), axis=1)
        if np.array_equal(new, assign):
            break
        assign = new
    history.append(float(_sq_dists(X, C)[np.arange(n), assign].sum()))
    return ClusterAssignment(cluster_of=assign, k=k, centroids=C, inertia_history=history)


def feature_heatmap(som: SomMap, feature: int) -> np.ndarray:
    """Weight of one feature on every unit, as a ``(rows, cols)`` grid."""
    if not 0 <= feature < som.dim:
        raise IndexError(f"feature index {feature} out of range for {som.dim} features")
    return som.weights[:, feature].reshape(som.rows, som.cols).copy()


@dataclass
class LocalExplanation:
    """Per-feature distance between a sample and its BMU.

    ``scores`` is sorted ascending: the smallest distance is the feature
    that most supports the prediction.
    """

    bmu: int
    predicted: int
    scores: list[tuple[str, float]]


def local_explanation(lm: LabeledMap, sample, names) -> LocalExplanation:
    x = np.asarray(sample, dtype=float)
    if len(names) != lm.som.dim:
        raise ValueError(f"{len(names)} feature names for a {lm.som.dim}-feature map")
    u, _ = best_matching_unit(lm.som, x)
    label = int(lm.unit_label[u])
    if label == UNLABELED:
        raise ValueError("map has unlabeled units; call resolve_unlabeled first")
    dist = np.abs(x - lm.som.weights[u])
    order = np.argsort(dist, kind="stable")
    return LocalExplanation(bmu=u, predicted=label,
                            scores=[(names[i], float(dist[i])) for i in order])


@dataclass
class ExplanationBundle:
    rows: int
    cols: int
    umatrix: np.ndarray
    overlay: StarburstOverlay
    unit_labels: np.ndarray
    clusters: ClusterAssignment
    heatmaps: dict[str, np.ndarray]
    feature_names: list[str]
    significance: np.ndarray
    local: dict[str, LocalExplanation]


def explanation_bundle(lm: LabeledMap, data: Dataset, k: int = 2, samples=None,
                       seed: int = 0, neighbourhood: int = 4) -> ExplanationBundle:
    """Compute every global artifact plus local explanations for ``samples``.

    Args:
        samples: optional row indices into ``data`` to explain.
    """
    som = lm.som
    if data.dim != som.dim:
        raise ValueError(f"dataset has {data.dim} features, map expects {som.dim}")
    um = u_matrix(som, neighbourhood)
    if data.significance is not None:
        sig = np.asarray(data.significance, dtype=float)
    elif data.num_samples >= 2:
        sig = feature_significance(data).values
    else:
        sig = np.zeros(data.dim)
    local = {}
    for s in samples or ():
        s = int(s)
        if not 0 <= s < data.num_samples:
            raise IndexError(f"unknown sample id {s}; dataset has {data.num_samples} rows")
        local[str(s)] = local_explanation(lm, data.features[s], data.feature_names)
    return ExplanationBundle(
        rows=som.rows,
        cols=som.cols,
        umatrix=um,
        overlay=starburst(um),
        unit_labels=lm.unit_label.reshape(som.rows, som.cols).copy(),
        clusters=kmeans_units(som, min(k, som.num_units), seed),
        heatmaps={name: feature_heatmap(som, i) for i, name in enumerate(data.feature_names)},
        feature_names=list(data.feature_names),
        significance=sig,
        local=local,
    )


def cluster_purity(cluster_of_unit, bmu_idx, labels) -> float:
    """Sample-weighted majority-label purity of unit clusters."""
    clusters = np.asarray(cluster_of_unit)[np.asarray(bmu_idx)]
    labels = np.asarray(labels)
    total = 0
    for c in np.unique(clusters):
        total += np.bincount(labels[clusters == c]).max()
    return total / len(labels)
