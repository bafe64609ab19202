"""Seeded synthetic flow datasets for tests and smoke runs."""

from __future__ import annotations

import numpy as np

from .ingest import Dataset


def _dataset(X, y, prefix="f"):
    X = np.clip(X, 0.0, 1.0)
    names = [f"{prefix}{i}" for i in range(X.shape[1])]
    return Dataset(features=X, labels=y, feature_names=names,
                   scaling=[(0.0, 1.0)] * X.shape[1], source="synthetic")


def make_two_gaussians(n_samples: int = 2000, dim: int = 4, separation: float = 8.0,
                       sigma: float = 0.04, seed: int = 0) -> Dataset:
    """Two isotropic Gaussian blobs, benign and malicious, half each.

    The centres sit ``separation * sigma`` apart along every axis, placed
    symmetrically around 0.5.
    """
    rng = np.random.default_rng(seed)
    gap = separation * sigma
    lo, hi = 0.5 - gap / 2, 0.5 + gap / 2
    n1 = n_samples // 2
    X = np.vstack([
        rng.normal(lo, sigma, size=(n_samples - n1, dim)),
        rng.normal(hi, sigma, size=(n1, dim)),
    ])
    y = np.r_[np.zeros(n_samples - n1, dtype=int), np.ones(n1, dtype=int)]
    perm = rng.permutation(n_samples)
    return _dataset(X[perm], y[perm])


def make_imbalanced(n_samples: int = 3000, dim: int = 6, benign_fraction: float = 0.7,
                    seed: int = 0) -> Dataset:
    """Imbalanced benign/malicious mixture loosely shaped like flow data.

    Benign traffic is spread over several broad clusters; attacks form a
    few tight clusters, each sitting at the edge of a benign cluster so the
    classes partly overlap.
    """
    rng = np.random.default_rng(seed)
    n_benign = int(round(n_samples * benign_fraction))
    n_mal = n_samples - n_benign
    benign_centres = rng.uniform(0.2, 0.8, size=(4, dim))
    X_b = benign_centres[rng.integers(0, 4, n_benign)] + rng.normal(0, 0.12, (n_benign, dim))
    # attack clusters: offset from a benign centre by roughly two benign sigmas
    offsets = rng.normal(0, 1, size=(3, dim))
    offsets *= 0.24 / np.linalg.norm(offsets, axis=1, keepdims=True) * np.sqrt(dim) / 2
    mal_centres = benign_centres[:3] + offsets
    X_m = mal_centres[rng.integers(0, 3, n_mal)] + rng.normal(0, 0.04, (n_mal, dim))
    X = np.vstack([X_b, X_m])
    y = np.r_[np.zeros(n_benign, dtype=int), np.ones(n_mal, dtype=int)]
    perm = rng.permutation(n_samples)
    return _dataset(X[perm], y[perm])
