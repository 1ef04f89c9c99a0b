"""Single-layer comparison methods: variational Bayes WSBM and spectral clustering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from sklearn.base import BaseEstimator, ClusterMixin

from .generator import MultilayerGraph
from .inference import InferenceOptions, run
from .validation import InvalidConfiguration, check_adjacency

__all__ = [
    "SpectralOptions",
    "spectral_clustering",
    "spectral_embedding",
    "kmeans",
    "single_layer_vb",
    "SpectralBaseline",
]


@dataclass
class SpectralOptions:
    k: int
    laplacian: str = "normalized_sym"
    kmeans_restarts: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.laplacian != "normalized_sym":
            raise ValueError(f"unsupported laplacian {self.laplacian!r}")
        if self.kmeans_restarts < 1:
            raise ValueError("kmeans_restarts must be positive")


def single_layer_vb(A, K_total, options=None, family="bernoulli", tau0=None):
    """Variational WSBM on one layer: the joint fit with one layer and no shared block."""
    graph = A if isinstance(A, MultilayerGraph) else MultilayerGraph([A], [family])
    if graph.L != 1:
        raise ValueError("single_layer_vb expects exactly one layer")
    return run(graph, 0, [K_total], options or InferenceOptions(),
               tau0=None if tau0 is None else [tau0])


def spectral_embedding(A, k):
    """Unit-norm rows of the k bottom eigenvectors of I - D^-1/2 A D^-1/2."""
    d = A.sum(axis=1)
    inv = np.zeros_like(d)
    nz = d > 0
    inv[nz] = 1.0 / np.sqrt(d[nz])
    lap = np.eye(len(d)) - inv[:, None] * A * inv[None, :]
    lap[~nz] = 0.0
    lap[:, ~nz] = 0.0
    _, vecs = eigh(lap, subset_by_index=[0, k - 1])
    # isolated vertices keep zero rows
    vecs[~nz] = 0.0
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return vecs / norms


def _farthest_point_seeds(X, k, rng):
    centers = [X[rng.integers(len(X))]]
    dist = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(dist))
        centers.append(X[nxt])
        dist = np.minimum(dist, np.sum((X - X[nxt]) ** 2, axis=1))
    return np.array(centers)


def _lloyd(X, centers, max_iter=300):
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        labels = np.argmin(d2, axis=1)
        new = centers.copy()
        for c in range(len(centers)):
            members = X[labels == c]
            if len(members):
                new[c] = members.mean(axis=0)
        if np.allclose(new, centers, rtol=0, atol=1e-12):
            break
        centers = new
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
    labels = np.argmin(d2, axis=1)
    return labels, float(d2[np.arange(len(X)), labels].sum())


def kmeans(X, k, restarts=10, rng=None):
    """Lloyd iterations from farthest-point seeds; lowest inertia over restarts."""
    rng = np.random.default_rng(rng)
    best, best_inertia = None, np.inf
    for _ in range(restarts):
        labels, inertia = _lloyd(X, _farthest_point_seeds(X, k, rng))
        if inertia < best_inertia - 1e-12:
            best, best_inertia = labels, inertia
    return best


def spectral_clustering(A, options):
    """Hard partition of a symmetric nonnegative weight matrix into ``options.k`` parts."""
    A = check_adjacency(A)
    if np.any(A < 0):
        raise ValueError("spectral clustering needs nonnegative weights")
    k = options.k
    active = int(np.sum(A.sum(axis=1) > 0))
    if not 2 <= k <= active:
        raise InvalidConfiguration(f"k={k} must lie in [2, {active}] "
                                   f"(number of non-isolated vertices)")
    emb = spectral_embedding(A, k)
    return kmeans(emb, k, options.kmeans_restarts, options.seed)


class SpectralBaseline(ClusterMixin, BaseEstimator):
    """Estimator wrapper around :func:`spectral_clustering`."""

    def __init__(self, n_clusters=4, kmeans_restarts=10, random_state=0):
        self.n_clusters = n_clusters
        self.kmeans_restarts = kmeans_restarts
        self.random_state = random_state

    def fit(self, X, y=None):
        opts = SpectralOptions(k=self.n_clusters, kmeans_restarts=self.kmeans_restarts,
                               seed=self.random_state)
        self.labels_ = spectral_clustering(X, opts)
        return self
