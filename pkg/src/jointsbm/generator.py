"""
Sampling of planted multilayer weighted SBMs.

Labels are 0-based: shared communities occupy ``0 .. K-1`` in every layer
and layer ``l`` owns the private indices ``K .. K_total[l]-1``. The file
formats written by :mod:`jointsbm.harness` shift them to 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exponfam import get_family

__all__ = [
    "GeneratorConfig",
    "MultilayerGraph",
    "CommunityStructure",
    "planted_theta",
    "sample_labels",
    "sample_graph",
    "sample",
]


@dataclass
class GeneratorConfig:
    """Parameters of the joint generative model.

    ``theta`` holds one symmetric ``K_total[l] x K_total[l]`` matrix per
    layer. When it is ``None`` the matrices are drawn from the conjugate
    prior given by ``tau0`` (one hyperparameter vector per layer).
    ``balanced`` replaces categorical label draws by an exact-proportion
    assignment shuffled over the vertices.

    ``redraw`` controls where a vertex that is private in layer 0 lands in
    the other layers: ``"private"`` renormalizes ``mu0[l]`` over the private
    indices, so shared communities have identical membership in every
    layer; ``"all"`` draws from the full ``mu0[l]``.
    """

    n: int
    K: int
    K_total: list
    families: list
    theta: list | None = None
    mu0: list | None = None
    tau0: list | None = None
    balanced: bool = False
    redraw: str = "private"

    def __post_init__(self):
        if self.redraw not in ("private", "all"):
            raise ValueError(f"redraw must be 'private' or 'all', got {self.redraw!r}")
        self.K_total = [int(k) for k in self.K_total]
        self.families = [get_family(f) for f in self.families]
        L = len(self.K_total)
        if L < 1 or len(self.families) != L:
            raise ValueError("need one family per layer")
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0 <= self.K <= min(self.K_total):
            raise ValueError(f"K={self.K} must lie in [0, min(K_total)={min(self.K_total)}]")
        if self.mu0 is None:
            self.mu0 = [np.full(k, 1.0 / k) for k in self.K_total]
        self.mu0 = [np.asarray(m, dtype=float) for m in self.mu0]
        for m, k in zip(self.mu0, self.K_total):
            if m.shape != (k,) or np.any(m < 0) or abs(m.sum() - 1) > 1e-9:
                raise ValueError("each mu0 must be a probability vector of length K_total[l]")
        if self.theta is not None:
            self.theta = [np.asarray(t, dtype=float) for t in self.theta]
            for t, k, fam in zip(self.theta, self.K_total, self.families):
                if t.shape != (k, k):
                    raise ValueError(f"theta must be {k}x{k}, got {t.shape}")
                if not np.allclose(t, t.T):
                    raise ValueError("theta must be symmetric")
                fam.check_theta(t, closed=True)
        if self.tau0 is None:
            self.tau0 = [np.asarray(f.default_tau0, dtype=float) for f in self.families]

    @property
    def L(self):
        return len(self.K_total)


@dataclass
class MultilayerGraph:
    """``L`` symmetric, zero-diagonal weight matrices over a common vertex set."""

    layers: list
    families: list

    def __post_init__(self):
        self.layers = [np.asarray(A, dtype=float) for A in self.layers]
        self.families = [get_family(f) for f in self.families]
        if len(self.layers) != len(self.families):
            raise ValueError("need one family per layer")
        if not self.layers:
            raise ValueError("need at least one layer")

    @property
    def L(self):
        return len(self.layers)

    @property
    def n(self):
        return self.layers[0].shape[0]


@dataclass
class CommunityStructure:
    """Per-layer integer labels; ``labels[l][i]`` is vertex ``i``'s community."""

    labels: list
    K: int = 0

    def __post_init__(self):
        self.labels = [np.asarray(g, dtype=np.int64) for g in self.labels]

    def coupled(self):
        """True when every vertex shared in layer 0 keeps its label everywhere."""
        g0 = self.labels[0]
        mask = g0 < self.K
        return all(np.array_equal(g[mask], g0[mask]) for g in self.labels[1:])


def planted_theta(p, q, K_total):
    """Matrix with ``p`` on the diagonal and ``q`` elsewhere."""
    return (p - q) * np.eye(K_total) + q * np.ones((K_total, K_total))


def _draw(probs, size, rng, balanced):
    if not balanced:
        return rng.choice(len(probs), size=size, p=probs)
    counts = np.floor(probs * size).astype(int)
    # hand leftover slots to the largest remainders
    short = size - counts.sum()
    if short:
        order = np.argsort(-(probs * size - counts), kind="stable")
        counts[order[:short]] += 1
    out = np.repeat(np.arange(len(probs)), counts)
    rng.shuffle(out)
    return out


def sample_labels(config, rng):
    """Draw labels in layer 0, then copy shared ones and redraw the rest per layer."""
    n, K = config.n, config.K
    g0 = _draw(config.mu0[0], n, rng, config.balanced)
    labels = [g0]
    private = g0 >= K
    for l in range(1, config.L):
        g = g0.copy()
        probs = config.mu0[l]
        offset = 0
        if config.redraw == "private":
            probs, offset = probs[K:], K
            if probs.sum() <= 0 and private.any():
                raise ValueError(f"layer {l} has no private community to draw from")
            probs = probs / probs.sum()
        if private.any():
            g[private] = offset + _draw(probs, int(private.sum()), rng, config.balanced)
        labels.append(g)
    return CommunityStructure(labels, K)


def sample_graph(config, structure, rng, theta=None):
    """Draw one weight per unordered vertex pair in every layer."""
    if theta is None:
        theta = config.theta
    if theta is None:
        raise ValueError("no theta given and none drawn; use sample()")
    n = config.n
    iu = np.triu_indices(n, k=1)
    layers = []
    for l, fam in enumerate(config.families):
        g = structure.labels[l]
        if g.shape != (n,) or g.min() < 0 or g.max() >= config.K_total[l]:
            raise ValueError(f"labels of layer {l} do not match the configuration")
        t = fam.check_theta(np.asarray(theta[l], dtype=float), closed=True)
        w = fam.sample_weight(t[g[iu[0]], g[iu[1]]], rng)
        A = np.zeros((n, n))
        A[iu] = w
        layers.append(A + A.T)
    return MultilayerGraph(layers, list(config.families))


def sample(config, rng=None):
    """Labels, graph and the theta used, drawing theta from the prior if unset."""
    rng = np.random.default_rng(rng)
    theta = config.theta
    if theta is None:
        theta = []
        for fam, k, tau0 in zip(config.families, config.K_total, config.tau0):
            t = fam.sample_param(np.broadcast_to(tau0, (k, k, fam.stat_dim)), rng)
            t = np.triu(t) + np.triu(t, 1).T
            theta.append(t)
    structure = sample_labels(config, rng)
    graph = sample_graph(config, structure, rng, theta=theta)
    return graph, structure, theta
