"""Partition metrics and the two-stage choice of community counts.

Stage one picks each layer's total count by BIC of a single-layer fit.
Stage two fixes those totals and picks the shared count by the summed
modularity of the joint fit's per-layer labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import single_layer_vb
from .exponfam import get_family
from .inference import run
from .validation import InvalidConfiguration, check_adjacency, check_multilayer

__all__ = [
    "nmi",
    "modularity",
    "bic",
    "select_K_total",
    "select_K_shared",
    "select_model",
    "SelectionReport",
]


def _entropy(counts, total):
    # sorted so equal count multisets give bitwise equal entropies
    p = np.sort(counts[counts > 0]) / total
    return float(-np.sum(p * np.log(p)))


def nmi(labels_a, labels_b):
    """Normalized mutual information ``2 I(a; b) / (H(a) + H(b))``.

    Equals 1 when both partitions are a single cluster.
    """
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"label vectors differ in length: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("label vectors must be nonempty")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(table, (ia, ib), 1)
    n = a.size
    ha = _entropy(table.sum(axis=1), n)
    hb = _entropy(table.sum(axis=0), n)
    if ha + hb == 0:
        return 1.0
    # I = H(a) + H(b) - H(a, b), which is exactly H(a) for identical partitions
    mi = ha + hb - _entropy(table.ravel(), n)
    return float(np.clip(2.0 * mi / (ha + hb), 0.0, 1.0))


def modularity(A, labels):
    """Newman modularity of a hard partition, with weights used as given."""
    A = np.asarray(A, dtype=float)
    labels = np.asarray(labels).ravel()
    if A.shape != (labels.size, labels.size):
        raise ValueError(f"adjacency {A.shape} does not match {labels.size} labels")
    two_m = A.sum()
    if two_m <= 0:
        raise ValueError("modularity is undefined for a graph without edges")
    _, g = np.unique(labels, return_inverse=True)
    Z = np.zeros((labels.size, g.max() + 1))
    Z[np.arange(labels.size), g] = 1.0
    inner = np.diag(Z.T @ A @ Z)
    deg = Z.T @ A.sum(axis=1)
    return float(np.sum(inner / two_m - (deg / two_m) ** 2))


def _hard_block_sums(stats, labels, k):
    """Unordered-pair statistic totals per block, as (k, k, d)."""
    Z = np.zeros((labels.size, k))
    Z[np.arange(labels.size), labels] = 1.0
    S = np.stack([Z.T @ st @ Z for st in stats], axis=-1)
    diag = np.arange(k)
    S[diag, diag] *= 0.5
    return S


def bic(A, fitted, family="bernoulli"):
    """``2 loglik - nu log(n(n-1)/2)`` at the MAP labels and posterior-mean blocks.

    ``fitted`` is a single-layer :class:`~jointsbm.inference.FitResult`.
    The log-likelihood includes the label term with empirical proportions;
    ``nu`` counts the block parameters and the ``K-1`` free label weights.
    Larger is better.
    """
    fam = get_family(family)
    A = check_adjacency(A, fam)
    n = A.shape[0]
    state = fitted.state
    if state.L != 1:
        raise ValueError("bic expects a single-layer fit")
    k = state.K_total[0]
    labels = fitted.labels.labels[0]
    theta = fam.posterior_mean(state.tau[0])
    eta = fam.natural(theta)
    stats = fam.stats(A)
    idx = np.arange(n)
    stats[:, idx, idx] = 0.0
    S = _hard_block_sums(stats, labels, k)
    iu = np.triu_indices(k)
    iu_pairs = np.triu_indices(n, k=1)
    loglik = float(np.sum(S[iu] * eta[iu])) + float(np.sum(fam.log_base_measure(A[iu_pairs])))
    counts = np.bincount(labels, minlength=k)
    used = counts > 0
    loglik += float(np.sum(counts[used] * np.log(counts[used] / n)))
    nu = fam.param_dim * k * (k + 1) / 2 + (k - 1)
    return 2.0 * loglik - nu * np.log(n * (n - 1) / 2)


def select_K_total(A, K_range, options=None, family="bernoulli", tau0=None):
    """BIC-maximizing community count for one layer; ties go to the smaller K."""
    K_range = sorted(int(k) for k in K_range)
    if not K_range:
        raise ValueError("K_range is empty")
    curve = {}
    for k in K_range:
        fit = single_layer_vb(A, k, options, family=family, tau0=tau0)
        curve[k] = bic(A, fit, family)
    best = max(K_range, key=lambda k: (curve[k], -k))
    return best, curve


def select_K_shared(graphs, K_total, K_range=None, options=None, tau0=None):
    """Shared count maximizing the summed per-layer modularity; ties go low."""
    graphs = check_multilayer(graphs)
    K_total = [int(k) for k in K_total]
    top = min(K_total)
    if K_range is None:
        K_range = range(2, top + 1)
    K_range = sorted(int(k) for k in K_range)
    if not K_range:
        raise InvalidConfiguration(f"empty shared-count range (min K_total = {top})")
    if K_range[0] < 0 or K_range[-1] > top:
        raise InvalidConfiguration(f"shared counts must lie in [0, {top}]")
    curve = {}
    for k in K_range:
        fit = run(graphs, k, K_total, options, tau0=tau0)
        curve[k] = sum(modularity(A, g) for A, g in zip(graphs.layers, fit.labels.labels))
    best = max(K_range, key=lambda k: (curve[k], -k))
    return best, curve


@dataclass
class SelectionReport:
    per_layer_K: list
    bic_curves: list
    shared_K: int
    modularity_curve: dict
    counts: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "per_layer_K": [int(k) for k in self.per_layer_K],
            "bic_curves": [{str(k): float(v) for k, v in c.items()} for c in self.bic_curves],
            "shared_K": int(self.shared_K),
            "modularity_curve": {str(k): float(v) for k, v in self.modularity_curve.items()},
            "counts": self.counts,
        }


def select_model(graphs, K_total_range, options=None, tau0=None):
    """Run both stages and report the chosen counts with their curves."""
    graphs = check_multilayer(graphs)
    if tau0 is None:
        tau0 = [None] * graphs.L
    per_layer, curves = [], []
    for A, fam, t0 in zip(graphs.layers, graphs.families, tau0):
        k, curve = select_K_total(A, K_total_range, options, fam, t0)
        per_layer.append(k)
        curves.append(curve)
    if min(per_layer) < 2:
        raise InvalidConfiguration(
            f"selected totals {per_layer} leave no shared count in [2, min K_total]")
    t0s = None if all(t is None for t in tau0) else [
        f.default_tau0 if t is None else t for f, t in zip(graphs.families, tau0)]
    shared, mcurve = select_K_shared(graphs, per_layer, None, options, t0s)
    counts = {"shared": int(shared), "private": [int(k - shared) for k in per_layer]}
    return SelectionReport(per_layer, curves, shared, mcurve, counts)
