"""Nonlinear dimensionality reduction for semantic embeddings.

Implements the cited manifold method's core: exact k-nearest-neighbor
graph, fuzzy membership strengths from locally adaptive kernels, and a
negative-sampled cross-entropy layout optimization. Spectral initialization
is replaced by PCA so runs are deterministic under a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# curve parameters fit for min_dist=0.1, the usual default
CURVE_A = 1.57694
CURVE_B = 0.8951

DEFAULT_N_NEIGHBORS = 15
DEFAULT_EPOCHS = 200
NEGATIVE_SAMPLES = 5
GRAD_CLIP = 4.0


@dataclass
class ReduceResult:
    embedding: np.ndarray
    degraded: bool = False


def _pairwise_distances(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    return np.sqrt(np.maximum(d2, 0.0))


def _smooth_knn_sigma(distances: np.ndarray, rho: float, target: float) -> float:
    """Binary search the kernel bandwidth so the effective neighbor count
    (sum of membership strengths) hits ``target``."""
    lo, hi = 1e-12, 1e6
    sigma = 1.0
    for _ in range(64):
        value = np.sum(np.exp(-np.maximum(distances - rho, 0.0) / sigma))
        if abs(value - target) < 1e-5:
            break
        if value > target:
            hi = sigma
            sigma = (lo + hi) / 2.0
        else:
            lo = sigma
            sigma = min(sigma * 2.0, hi) if hi < 1e6 else sigma * 2.0
    return sigma


def fuzzy_graph(X: np.ndarray, n_neighbors: int) -> tuple[np.ndarray, np.ndarray]:
    """Symmetrized fuzzy membership matrix and the kNN index table."""
    n = X.shape[0]
    k = min(n_neighbors, n - 1)
    dist = _pairwise_distances(X)
    order = np.argsort(dist, axis=1, kind="stable")
    knn_idx = order[:, 1 : k + 1]
    knn_dist = np.take_along_axis(dist, knn_idx, axis=1)
    W = np.zeros((n, n))
    target = np.log2(k) if k > 1 else 1.0
    for i in range(n):
        nonzero = knn_dist[i][knn_dist[i] > 0.0]
        rho = float(nonzero.min()) if nonzero.size else 0.0
        sigma = _smooth_knn_sigma(knn_dist[i], rho, target)
        weights = np.exp(-np.maximum(knn_dist[i] - rho, 0.0) / sigma)
        W[i, knn_idx[i]] = weights
    # probabilistic t-conorm: P(i~j) = w_ij + w_ji - w_ij * w_ji
    return W + W.T - W * W.T, knn_idx


def _pca(X: np.ndarray, r: int) -> np.ndarray:
    centered = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return centered @ vt[:r].T


class EmbeddingReducer:
    """Fit/transform reducer; ``transform`` places new points at the
    membership-weighted average of their nearest training embeddings."""

    def __init__(
        self,
        r: int = 8,
        n_neighbors: int = DEFAULT_N_NEIGHBORS,
        epochs: int = DEFAULT_EPOCHS,
        seed: int = 0,
    ) -> None:
        if r < 1:
            raise ValueError("target dimension must be >= 1")
        self.r = r
        self.n_neighbors = n_neighbors
        self.epochs = epochs
        self.seed = seed
        self._train_X: np.ndarray | None = None
        self._train_Y: np.ndarray | None = None
        self.degraded = False

    def fit_transform(self, vectors: np.ndarray) -> np.ndarray:
        X = np.asarray(vectors, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("expected a 2-d array of vectors")
        n, d = X.shape
        self._train_X = X
        if n < self.r + 2:
            # too few points to build a neighborhood graph: pass through,
            # truncating or zero-padding to the target dimension
            self.degraded = True
            Y = np.zeros((n, self.r))
            Y[:, : min(d, self.r)] = X[:, : self.r]
            self._train_Y = Y
            return Y.copy()
        self.degraded = False
        if np.allclose(_pairwise_distances(X), 0.0):
            self._train_Y = np.zeros((n, self.r))
            return self._train_Y.copy()

        W, _ = fuzzy_graph(X, self.n_neighbors)
        rows, cols = np.nonzero(np.triu(W, 1))
        weights = W[rows, cols]

        Y = _pca(X, self.r)
        span = np.abs(Y).max()
        if span > 0:
            Y = Y / span * 10.0
        rng = np.random.default_rng(self.seed)

        max_w = weights.max()
        sample_prob = weights / max_w
        for epoch in range(self.epochs):
            alpha = 1.0 - epoch / self.epochs
            active = rng.random(rows.shape[0]) < sample_prob
            a_idx, b_idx = rows[active], cols[active]
            if a_idx.size == 0:
                continue
            delta = Y[a_idx] - Y[b_idx]
            d2 = np.sum(delta * delta, axis=1)
            d2_safe = np.where(d2 > 0, d2, 1.0)
            # attractive gradient of the low-dimensional membership curve
            coef = (-2.0 * CURVE_A * CURVE_B * d2_safe ** (CURVE_B - 1.0)) / (
                1.0 + CURVE_A * d2_safe**CURVE_B
            )
            coef = np.where(d2 > 0, coef, 0.0)
            grad = np.clip(coef[:, None] * delta, -GRAD_CLIP, GRAD_CLIP)
            update = np.zeros_like(Y)
            np.add.at(update, a_idx, grad)
            np.add.at(update, b_idx, -grad)
            # repulsive updates from sampled non-neighbors
            for _ in range(NEGATIVE_SAMPLES):
                c_idx = rng.integers(0, n, size=a_idx.size)
                delta_n = Y[a_idx] - Y[c_idx]
                d2_n = np.sum(delta_n * delta_n, axis=1)
                coef_n = (2.0 * CURVE_B) / (
                    (0.001 + d2_n) * (1.0 + CURVE_A * d2_n**CURVE_B)
                )
                coef_n = np.where(a_idx != c_idx, coef_n, 0.0)
                np.add.at(
                    update, a_idx, np.clip(coef_n[:, None] * delta_n, -GRAD_CLIP, GRAD_CLIP)
                )
            Y = Y + alpha * update
        self._train_Y = Y
        return Y.copy()

    def transform(self, vectors: np.ndarray) -> np.ndarray:
        if self._train_X is None or self._train_Y is None:
            raise RuntimeError("reducer has not been fit")
        X = np.asarray(vectors, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("expected a 2-d array of vectors")
        k = min(self.n_neighbors, self._train_X.shape[0])
        out = np.zeros((X.shape[0], self.r))
        for i, x in enumerate(X):
            dist = np.linalg.norm(self._train_X - x, axis=1)
            nearest = np.argsort(dist, kind="stable")[:k]
            weights = 1.0 / (dist[nearest] + 1e-9)
            weights /= weights.sum()
            out[i] = weights @ self._train_Y[nearest]
        return out


def neighborhood_preservation(X: np.ndarray, Y: np.ndarray, k: int = 5) -> float:
    """Mean fraction of each point's k nearest neighbors preserved after
    reduction; the usual sanity oracle for embeddings."""
    dx = _pairwise_distances(np.asarray(X, dtype=np.float64))
    dy = _pairwise_distances(np.asarray(Y, dtype=np.float64))
    n = dx.shape[0]
    scores = []
    for i in range(n):
        nx = set(np.argsort(dx[i], kind="stable")[1 : k + 1].tolist())
        ny = set(np.argsort(dy[i], kind="stable")[1 : k + 1].tolist())
        scores.append(len(nx & ny) / k)
    return float(np.mean(scores))
