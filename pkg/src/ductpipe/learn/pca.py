"""Principal component analysis via eigendecomposition of the sample covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class PcaModel:
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (k, d), rows orthonormal, descending eigenvalue
    eigenvalues: np.ndarray  # (k,)

    @property
    def k(self) -> int:
        return self.components.shape[0]


def pca_fit(X: np.ndarray, k: int) -> PcaModel:
    """Top-k eigenvectors of the sample covariance of mean-centered X.

    Sign convention: the largest-magnitude entry of each component is
    positive, which makes the decomposition deterministic.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    if not 1 <= k <= min(n, d):
        raise ValueError(f"k={k} out of range [1, {min(n, d)}]")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)  # ascending
    order = np.argsort(eigvals)[::-1][:k]
    components = eigvecs[:, order].T
    eigenvalues = eigvals[order]
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    return PcaModel(mean=mean, components=components, eigenvalues=eigenvalues)


def pca_transform(model: PcaModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.mean.shape[0]:
        raise ValueError(f"expected {model.mean.shape[0]} columns, got {X.shape[1]}")
    return (X - model.mean) @ model.components.T


def pca_inverse_transform(model: PcaModel, Z: np.ndarray) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    return Z @ model.components + model.mean
