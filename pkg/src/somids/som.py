"""Kohonen self-organizing map on a square grid.

Units are stored row-major: unit ``u`` sits at grid coordinate
``(u // cols, u % cols)``. Training presents one randomly drawn sample per
step, moves its best matching unit (BMU) toward it and drags grid
neighbours along with a Gaussian falloff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

EPS = 1e-9
SCHEDULES = ("exponential",)


@dataclass
class SomMap:
    rows: int
    cols: int
    weights: np.ndarray  # (rows * cols, dim)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.rows < 1 or self.cols < 1:
            raise ValueError("map dimensions must be positive")
        if self.weights.ndim != 2 or self.weights.shape[0] != self.rows * self.cols:
            raise ValueError(
                f"weights must have {self.rows * self.cols} rows, got shape {self.weights.shape}"
            )

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def num_units(self) -> int:
        return self.rows * self.cols

    def coords(self, unit: int) -> tuple[int, int]:
        return divmod(int(unit), self.cols)

    def grid_coords(self) -> np.ndarray:
        """``(num_units, 2)`` array of (row, col) per unit."""
        r, c = np.divmod(np.arange(self.num_units), self.cols)
        return np.column_stack([r, c])

    def copy(self) -> SomMap:
        return SomMap(self.rows, self.cols, self.weights.copy())


@dataclass
class TrainConfig:
    """Training hyperparameters.

    ``steps`` is the number of single-sample presentations. ``epochs``, when
    set, overrides it with ``epochs * num_samples`` capped at ``max_steps``.
    ``radius0=None`` means half the longer grid side.
    """

    steps: int = 10_000
    lr0: float = 0.7
    radius0: float | None = None
    seed: int = 0
    schedule: str = "exponential"
    epochs: int | None = None
    max_steps: int = 200_000
    trace_every: int | None = None
    trace_samples: int = 2_000

    def __post_init__(self):
        if self.epochs is None and self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.epochs is not None and self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not 0 < self.lr0 <= 1:
            raise ValueError("lr0 must lie in (0, 1]")
        if self.radius0 is not None and self.radius0 < 0:
            raise ValueError("radius0 must be non-negative")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")

    def total_steps(self, num_samples: int) -> int:
        if self.epochs is None:
            return self.steps
        return max(1, min(self.epochs * num_samples, self.max_steps))

    def initial_radius(self, rows: int, cols: int) -> float:
        return max(rows, cols) / 2 if self.radius0 is None else float(self.radius0)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainTrace:
    checkpoints: list[tuple[int, float, float]] = field(default_factory=list)


def init_map(n: int, m: int, dim: int, seed: int) -> SomMap:
    """Map with weights drawn i.i.d. uniform on [0, 1] from a seeded RNG."""
    if n < 1 or m < 1 or dim < 1:
        raise ValueError(f"map dimensions must be positive, got ({n}, {m}, {dim})")
    rng = np.random.default_rng(seed)
    return SomMap(n, m, rng.random((n * m, dim)))


def _check_sample(som: SomMap, sample) -> np.ndarray:
    x = np.asarray(sample, dtype=float)
    if x.ndim != 1 or x.shape[0] != som.dim:
        raise ValueError(f"sample has shape {x.shape}, map expects ({som.dim},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return x


def unit_distances(som: SomMap, sample) -> np.ndarray:
    """Euclidean distance from ``sample`` to every unit."""
    x = _check_sample(som, sample)
    return np.sqrt(np.sum((som.weights - x) ** 2, axis=1))


def best_matching_unit(som: SomMap, sample) -> tuple[int, float]:
    """Nearest unit by Euclidean distance; ties go to the lowest index."""
    d = unit_distances(som, sample)
    u = int(np.argmin(d))
    return u, float(d[u])


def second_bmu(som: SomMap, sample) -> tuple[int, float]:
    """Runner-up unit after the BMU, using the same tie-break."""
    if som.num_units < 2:
        raise ValueError("second BMU needs a map with at least 2 units")
    d = unit_distances(som, sample)
    order = np.argsort(d, kind="stable")
    u = int(order[1])
    return u, float(d[u])


def pairwise_distances(X, weights) -> np.ndarray:
    """``(num_samples, num_units)`` Euclidean distance matrix.

    Computed from explicit differences, the same arithmetic as
    :func:`unit_distances`, so batch and single-sample BMU searches agree
    bit for bit.
    """
    X = np.asarray(X, dtype=float)
    W = np.asarray(weights, dtype=float)
    out = np.empty((X.shape[0], W.shape[0]))
    for sl in _chunks(X.shape[0], max(1, 2_000_000 // max(1, W.size))):
        out[sl] = np.sqrt(np.sum((X[sl, None, :] - W[None, :, :]) ** 2, axis=2))
    return out


def _chunks(n, size=4096):
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def bmus(som: SomMap, X) -> tuple[np.ndarray, np.ndarray]:
    """BMU index and distance for every row of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != som.dim:
        raise ValueError(f"data has shape {X.shape}, map expects (*, {som.dim})")
    idx = np.empty(len(X), dtype=int)
    dist = np.empty(len(X))
    for sl in _chunks(len(X)):
        D = pairwise_distances(X[sl], som.weights)
        idx[sl] = np.argmin(D, axis=1)
        dist[sl] = D[np.arange(D.shape[0]), idx[sl]]
    return idx, dist


def bmu_pairs(som: SomMap, X) -> tuple[np.ndarray, np.ndarray]:
    """First and second BMU indices for every row of ``X``."""
    if som.num_units < 2:
        raise ValueError("second BMU needs a map with at least 2 units")
    X = np.asarray(X, dtype=float)
    first = np.empty(len(X), dtype=int)
    second = np.empty(len(X), dtype=int)
    for sl in _chunks(len(X)):
        D = pairwise_distances(X[sl], som.weights)
        order = np.argsort(D, axis=1, kind="stable")
        first[sl] = order[:, 0]
        second[sl] = order[:, 1]
    return first, second


def schedule(config: TrainConfig, t: int, total_steps: int | None = None,
             radius0: float | None = None) -> tuple[float, float]:
    """Learning rate and neighbourhood radius at step ``t``.

    Both decay exponentially; the radius shrinks from ``radius0`` to 1 over
    the run (or stays put when ``radius0 <= 1``).
    """
    T = config.steps if total_steps is None else total_steps
    r0 = (config.radius0 if config.radius0 is not None else 1.0) if radius0 is None else radius0
    lr = config.lr0 * math.exp(-t / T)
    radius = r0 * math.exp(-t * math.log(max(r0, 1.0)) / T)
    return lr, radius


def _neighbourhood(grid_d2_row, lr, radius):
    r = max(radius, EPS)
    h = lr * np.exp(-grid_d2_row / (2.0 * r * r))
    h[grid_d2_row > radius * radius] = 0.0
    return h


def _grid_sq_distances(som: SomMap) -> np.ndarray:
    g = som.grid_coords().astype(float)
    return ((g[:, None, :] - g[None, :, :]) ** 2).sum(axis=2)


def train_step(som: SomMap, sample, lr: float, radius: float) -> SomMap:
    """One update: BMU and grid neighbours within ``radius`` move toward ``sample``.

    Returns a new map; ``som`` is left untouched.
    """
    x = _check_sample(som, sample)
    out = som.copy()
    bmu, _ = best_matching_unit(som, x)
    d2 = _grid_sq_distances(som)[bmu]
    h = _neighbourhood(d2, lr, radius)
    out.weights -= h[:, None] * (out.weights - x)
    return out


def quantization_error_fast(som, X):
    return float(bmus(som, X)[1].mean())


def _trace_point(som, X):
    first, second = bmu_pairs(som, X)
    dist = np.sqrt(((X - som.weights[first]) ** 2).sum(axis=1))
    r1, c1 = np.divmod(first, som.cols)
    r2, c2 = np.divmod(second, som.cols)
    adjacent = (np.abs(r1 - r2) + np.abs(c1 - c2)) == 1
    return float(dist.mean()), float(1.0 - adjacent.mean())


def train(som: SomMap, data, config: TrainConfig) -> tuple[SomMap, TrainTrace]:
    """Run the sequential training loop.

    Args:
        som: initial map; not modified.
        data: a :class:`~somids.ingest.Dataset` or a 2-d array of samples.
        config: hyperparameters and RNG seed for sample picking.

    Returns:
        The trained map and a trace of (step, quantization error,
        topographic error) checkpoints.
    """
    X = np.asarray(getattr(data, "features", data), dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training data is empty")
    if X.shape[1] != som.dim:
        raise ValueError(f"data has {X.shape[1]} features, map expects {som.dim}")
    if not np.all(np.isfinite(X)):
        raise ValueError("training data contains non-finite values")

    T = config.total_steps(len(X))
    r0 = config.initial_radius(som.rows, som.cols)
    rng = np.random.default_rng(config.seed)
    picks = rng.integers(0, len(X), size=T)
    every = config.trace_every or max(1, T // 10)
    probe = X
    if len(X) > config.trace_samples:
        probe = X[np.sort(rng.choice(len(X), config.trace_samples, replace=False))]

    out = som.copy()
    W = out.weights
    grid_d2 = _grid_sq_distances(out)
    trace = TrainTrace()
    for t in range(T):
        x = X[picks[t]]
        diff = W - x
        bmu = int(np.argmin(np.sqrt(np.sum(diff * diff, axis=1))))
        lr, radius = schedule(config, t, T, r0)
        h = _neighbourhood(grid_d2[bmu], lr, radius)
        W -= h[:, None] * diff
        if (t + 1) % every == 0 or t == T - 1:
            if som.num_units >= 2:
                qe, te = _trace_point(out, probe)
            else:
                qe, te = quantization_error_fast(out, probe), 0.0
            trace.checkpoints.append((t + 1, qe, te))
    return out, trace


class SelfOrganizingMap(TransformerMixin, BaseEstimator):
    """Scikit-learn style wrapper around :func:`init_map` and :func:`train`.

    ``transform`` returns each sample's distance to every unit (like
    :class:`sklearn.cluster.KMeans`); ``predict`` returns the BMU index.

    Parameters:
        n_rows, n_cols: grid shape.
        steps: single-sample presentations (ignored when ``epochs`` is set).
        epochs: passes over the data, ``steps = epochs * n_samples`` capped
            at ``max_steps``.
        lr0, radius0: initial learning rate and neighbourhood radius.
        random_state: seed for both weight initialisation and sample picks.
    """

    def __init__(self, n_rows=18, n_cols=18, steps=10_000, epochs=None, max_steps=200_000,
                 lr0=0.7, radius0=None, random_state=0):
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.steps = steps
        self.epochs = epochs
        self.max_steps = max_steps
        self.lr0 = lr0
        self.radius0 = radius0
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        seed = 0 if self.random_state is None else int(self.random_state)
        return TrainConfig(steps=self.steps, lr0=self.lr0, radius0=self.radius0, seed=seed,
                           epochs=self.epochs, max_steps=self.max_steps)

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        config = self._config()
        initial = init_map(self.n_rows, self.n_cols, X.shape[1], config.seed)
        self.som_, self.trace_ = train(initial, X, config)
        self.initial_som_ = initial
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "som_")
        X = check_array(X, dtype=float)
        return pairwise_distances(X, self.som_.weights)

    def predict(self, X):
        check_is_fitted(self, "som_")
        X = check_array(X, dtype=float)
        return bmus(self.som_, X)[0]

    def fit_predict(self, X, y=None):
        return self.fit(X).predict(X)

    @property
    def weights_(self):
        check_is_fitted(self, "som_")
        return self.som_.weights
