"""
Mean-field variational Bayes for joint multilayer weighted SBMs.

Each layer ``l`` carries a row-stochastic membership matrix ``mu[l]`` of
shape ``(n, K_total[l])`` and one conjugate posterior hyperparameter vector
per unordered community pair, stored symmetrically in ``tau[l]`` of shape
``(K_total[l], K_total[l], stat_dim)``. The first ``K`` columns of every
layer are the shared communities.

One outer iteration refreshes every ``tau`` and then sweeps the vertices
in order until the memberships stop moving. For vertex ``i`` the sweep

1. scores every community ``k`` in every layer from the current neighbour
   memberships, ``sum_j sum_b T(A_ij) . Ebar[k, b] * mu[j, b]``;
2. averages the shared-column scores over the layers and writes the
   average into every layer;
3. keeps the private-column scores of each layer as they are;
4. soft-maxes each layer's row.

Labels are read off with an argmax; ties go to the lowest index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import xlogy
from sklearn.base import BaseEstimator, ClusterMixin

from . import _kernels
from .generator import CommunityStructure
from .validation import InvalidConfiguration, check_K, check_multilayer

__all__ = [
    "InferenceOptions",
    "VariationalState",
    "FitResult",
    "DegenerateRowError",
    "quadrant",
    "init_state",
    "update_tau",
    "update_mu_shared",
    "update_mu_private",
    "normalize_mu",
    "elbo",
    "map_labels",
    "run",
    "elbo_violations",
    "JointWSBM",
]

logger = logging.getLogger(__name__)


class DegenerateRowError(FloatingPointError):
    """A membership row has no finite log-score."""


@dataclass
class InferenceOptions:
    tol: float = 1e-6
    max_outer: int = 100
    max_inner: int = 50
    restarts: int = 5
    init: str = "spectral"
    damping: float = 0.0
    prior_in_mu: bool = False
    seed: int = 0
    update: str = "averaged"

    def __post_init__(self):
        if self.update not in ("averaged", "coupled"):
            raise ValueError(f"unknown update rule {self.update!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 <= self.damping < 1:
            raise ValueError("damping must lie in [0, 1)")
        if self.init not in ("spectral", "random", "provided"):
            raise ValueError(f"unknown init mode {self.init!r}")
        if self.restarts < 1 or self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("restarts and iteration caps must be positive")


@dataclass
class VariationalState:
    mu: list
    tau: list
    K: int
    tau0: list
    mu0: list
    elbo_trace: list = field(default_factory=list)
    log_scores: list | None = None
    converged: bool = False
    n_outer: int = 0
    seed: int | None = None

    @property
    def L(self):
        return len(self.mu)

    @property
    def K_total(self):
        return [m.shape[1] for m in self.mu]

    def copy(self):
        return replace(
            self,
            mu=[m.copy() for m in self.mu],
            tau=[t.copy() for t in self.tau],
            elbo_trace=list(self.elbo_trace),
            log_scores=None if self.log_scores is None else [s.copy() for s in self.log_scores],
        )


def quadrant(a, b, K):
    """Block type of the community pair ``(a, b)``: 'SS', 'SP', 'PS' or 'PP'."""
    return ("S" if a < K else "P") + ("S" if b < K else "P")


class _Layer:
    """Per-layer precomputation: sufficient-statistic matrices and base measure."""

    def __init__(self, A, family, tau0):
        self.family = family
        self.tau0 = family.check_tau(tau0)
        n = A.shape[0]
        stats = family.stats(A)
        diag = np.arange(n)
        stats[:, diag, diag] = 0.0
        self.stats = stats
        # rows of ``flat`` hit the stacked per-statistic neighbour scores
        self.flat = np.concatenate(list(stats), axis=1)
        iu = np.triu_indices(n, k=1)
        self.log_h = float(np.sum(family.log_base_measure(A[iu])))
        self.n = n


def _prepare(graphs, tau0=None):
    if isinstance(graphs, list) and graphs and isinstance(graphs[0], _Layer):
        return graphs
    if tau0 is None:
        tau0 = [f.default_tau0 for f in graphs.families]
    return [_Layer(A, f, t) for A, f, t in zip(graphs.layers, graphs.families, tau0)]


def _pair_sums(mu, stats):
    """Ordered-pair sums ``sum_{i != j} T_d(A_ij) mu_ia mu_jb`` as (K, K, d)."""
    S = np.stack([mu.T @ (st @ mu) for st in stats], axis=-1)
    return 0.5 * (S + S.transpose(1, 0, 2))


def _scores(layer, mu, ebar):
    """All-vertex community scores (n, K) for one layer."""
    return sum(st @ mu @ ebar[:, :, d].T for d, st in enumerate(layer.stats))


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def _greedy_match(a, b, ka, kb):
    """Greedy maximum-overlap pairing between two labelings."""
    overlap = np.zeros((ka, kb))
    np.add.at(overlap, (a, b), 1)
    pairs = {}
    work = overlap.copy()
    for _ in range(min(ka, kb)):
        i, j = np.unravel_index(np.argmax(work), work.shape)
        pairs[int(i)] = (int(j), overlap[i, j])
        work[i, :] = -1
        work[:, j] = -1
    return pairs


def align_shared(hard, K, K_total):
    """Relabel per-layer hard clusterings so matched clusters occupy ``0..K-1``.

    Layer 0's clusters are ranked by their total greedy overlap with the
    other layers; the top ``K`` become the shared communities and their
    partners in every other layer receive the same indices.
    """
    L = len(hard)
    matches = [_greedy_match(hard[0], hard[l], K_total[0], K_total[l]) for l in range(1, L)]
    score = np.zeros(K_total[0])
    for m in matches:
        for a, (_, ov) in m.items():
            score[a] += ov
    order = np.argsort(-score, kind="stable")
    shared = [int(a) for a in order[:K]]
    out = []
    for l in range(L):
        perm = np.empty(K_total[l], dtype=np.int64)
        if l == 0:
            partners = shared
        else:
            partners = [matches[l - 1][a][0] for a in shared]
        perm[partners] = np.arange(K)
        rest = [c for c in range(K_total[l]) if c not in partners]
        perm[rest] = np.arange(K, K_total[l])
        out.append(perm[hard[l]])
    return out


def _soften(labels, k, eps=0.1):
    n = len(labels)
    if k == 1:
        return np.ones((n, 1))
    mu = np.full((n, k), eps / (k - 1))
    mu[np.arange(n), labels] = 1.0 - eps
    return mu


def _tie_shared(mu, K, exact=False):
    """Copy layer 0's shared block into every layer.

    Rows are renormalized, or with ``exact`` the private block is rescaled
    so the shared entries stay identical across layers.
    """
    out = [mu[0]]
    rho = 1.0 - mu[0][:, :K].sum(axis=1, keepdims=True)
    for m in mu[1:]:
        m = m.copy()
        m[:, :K] = mu[0][:, :K]
        if exact and m.shape[1] > K:
            priv = m[:, K:]
            m[:, K:] = rho * priv / priv.sum(axis=1, keepdims=True)
        else:
            m = m / m.sum(axis=1, keepdims=True)
        out.append(m)
    return out


def init_state(graphs, K, K_total, options=None, rng=None, *, tau0=None, mu0=None,
               init_mu=None, mode=None):
    """Starting memberships by spectral clustering, Dirichlet draws or given rows."""
    options = options or InferenceOptions()
    graphs = check_multilayer(graphs)
    K, K_total = check_K(K, K_total, graphs.n, graphs.L)
    rng = np.random.default_rng(rng)
    mode = mode or options.init
    n, L = graphs.n, graphs.L
    if mode == "spectral":
        from .baselines import SpectralOptions, spectral_clustering

        hard = []
        for A, k in zip(graphs.layers, K_total):
            seed = int(rng.integers(2**31))
            if k == 1:
                hard.append(np.zeros(n, dtype=np.int64))
            else:
                hard.append(spectral_clustering(A, SpectralOptions(k=k, seed=seed)))
        hard = align_shared(hard, K, K_total)
        mu = [_soften(h, k) for h, k in zip(hard, K_total)]
    elif mode == "random":
        mu = [rng.dirichlet(np.ones(k), size=n) for k in K_total]
    elif mode == "provided":
        if init_mu is None:
            raise InvalidConfiguration("init='provided' needs init_mu")
        mu = [np.array(m, dtype=float) for m in init_mu]
        for m, k in zip(mu, K_total):
            if m.shape != (n, k) or np.any(m < 0):
                raise InvalidConfiguration(f"provided memberships must be nonnegative ({n}, {k})")
        mu = [m / m.sum(axis=1, keepdims=True) for m in mu]
    else:
        raise ValueError(f"unknown init mode {mode!r}")
    mu = _tie_shared(mu, K, exact=options.update == "coupled")
    if tau0 is None:
        tau0 = [f.default_tau0 for f in graphs.families]
    tau0 = [f.check_tau(t) for f, t in zip(graphs.families, tau0)]
    if mu0 is None:
        mu0 = [np.full(k, 1.0 / k) for k in K_total]
    mu0 = [np.asarray(m, dtype=float) for m in mu0]
    tau = [np.broadcast_to(t, (k, k, len(t))).copy() for t, k in zip(tau0, K_total)]
    return VariationalState(mu=mu, tau=tau, K=K, tau0=tau0, mu0=mu0)


# ---------------------------------------------------------------------------
# coordinate updates
# ---------------------------------------------------------------------------

def _update_tau(state, layers):
    for l, layer in enumerate(layers):
        S = _pair_sums(state.mu[l], layer.stats)
        diag = np.arange(S.shape[0])
        # a within-block pair appears twice among the ordered pairs
        S[diag, diag] *= 0.5
        state.tau[l] = layer.tau0 + S
    return state


def update_tau(state, graphs):
    """Conjugate posterior per unordered block, ``tau0 + sum_{i<j} T(A_ij) w_ij``.

    ``w_ij`` is ``mu_ia mu_jb + mu_ib mu_ja`` off the diagonal and
    ``mu_ia mu_ja`` on it.
    """
    state = state.copy()
    return _update_tau(state, _prepare(graphs, state.tau0))


def _ebar(state, layers):
    return [layer.family.expected_natural(t) for layer, t in zip(layers, state.tau)]


def update_mu_shared(state, graphs, prior_in_mu=False):
    """Layer-averaged log-scores of the shared columns, written into every layer.

    Every row is scored from the same (current) memberships. The result is
    stored un-normalized in ``state.log_scores``; call :func:`normalize_mu`
    after :func:`update_mu_private`.
    """
    state = state.copy()
    layers = _prepare(graphs, state.tau0)
    ebar = _ebar(state, layers)
    K = state.K
    acc = sum(_scores(layer, m, e)[:, :K] for layer, m, e in zip(layers, state.mu, ebar))
    acc = acc / len(layers)
    if prior_in_mu:
        acc = acc + np.log(state.mu0[0][:K])
    if state.log_scores is None:
        state.log_scores = [np.zeros_like(m) for m in state.mu]
    for s in state.log_scores:
        s[:, :K] = acc
    return state


def update_mu_private(state, graphs, prior_in_mu=False):
    """Per-layer log-scores of the private columns; no cross-layer coupling."""
    state = state.copy()
    layers = _prepare(graphs, state.tau0)
    ebar = _ebar(state, layers)
    K = state.K
    if state.log_scores is None:
        state.log_scores = [np.zeros_like(m) for m in state.mu]
    for l, (layer, m, e) in enumerate(zip(layers, state.mu, ebar)):
        if m.shape[1] == K:
            continue
        s = _scores(layer, m, e)[:, K:]
        if prior_in_mu:
            s = s + np.log(state.mu0[l][K:])
        state.log_scores[l][:, K:] = s
    return state


def _softmax_rows(x):
    x = np.asarray(x, dtype=float)
    top = np.max(x, axis=-1, keepdims=True)
    if np.any(~np.isfinite(top)) or np.any(np.isnan(x)):
        raise DegenerateRowError("membership row without a finite log-score")
    e = np.exp(x - top)
    return e / e.sum(axis=-1, keepdims=True)


def normalize_mu(state):
    """Turn ``state.log_scores`` into row-stochastic memberships."""
    if state.log_scores is None:
        raise ValueError("no log-scores to normalize; run the mu updates first")
    state = state.copy()
    state.mu = [_softmax_rows(s) for s in state.log_scores]
    state.log_scores = None
    return state


def _pack_stats(layers):
    L, n = len(layers), layers[0].n
    D = max(layer.stats.shape[0] for layer in layers)
    F = np.zeros((L, n, D * n))
    for l, layer in enumerate(layers):
        F[l, :, : layer.flat.shape[1]] = layer.flat
    return F


def _sweep(state, F, ebar, options, packed_mu):
    """One in-place Gauss-Seidel pass over the vertices; returns max |delta mu|."""
    L, _, Km = packed_mu.shape
    D = F.shape[2] // F.shape[1]
    Kl = np.array(state.K_total, dtype=np.int64)
    E = np.zeros((L, D, Km, Km))
    prior = np.zeros((L, Km))
    for l, e in enumerate(ebar):
        k = e.shape[0]
        E[l, : e.shape[2], :k, :k] = e.transpose(2, 0, 1)
        if options.prior_in_mu:
            prior[l, :k] = np.log(state.mu0[l])
    coupled = options.update == "coupled"
    if coupled:
        prior[:] = 0.0
        for l, lp in enumerate(_coupled_log_prior(state)):
            prior[l, : len(lp)] = lp
    elif options.prior_in_mu:
        # the shared label prior is that of layer 0, drawn once
        prior[:, : state.K] = prior[0, : state.K]
    delta = _kernels.sweep(F, E, packed_mu, Kl, state.K, prior,
                           float(options.damping), coupled)
    if delta < 0:
        raise DegenerateRowError(f"vertex {int(-delta - 1)} has no finite log-score")
    return delta


def _coupled_log_prior(state):
    """Layer 0 keeps its full prior; later layers renormalize over private columns."""
    K = state.K
    out = []
    for l, m0 in enumerate(state.mu0):
        lp = np.full(len(m0), -np.inf)
        with np.errstate(divide="ignore"):
            if l == 0:
                lp = np.log(m0)
            elif len(m0) > K and m0[K:].sum() > 0:
                lp[K:] = np.log(m0[K:] / m0[K:].sum())
        out.append(lp)
    return out


def _label_term(state, update="averaged"):
    K = state.K
    if update == "coupled":
        m, m0 = state.mu[0], state.mu0[0]
        total = float(np.sum(xlogy(m, m0)) - np.sum(xlogy(m, m)))
        for m, lp in zip(state.mu[1:], _coupled_log_prior(state)[1:]):
            mm = m[:, K:]
            # private mass of the row; equals layer 0's up to rounding
            rho = mm.sum(axis=1, keepdims=True)
            pp = np.exp(lp[K:])
            total += float(np.sum(xlogy(mm, pp)) + np.sum(xlogy(mm, rho)) - np.sum(xlogy(mm, mm)))
        return total
    total = 0.0
    for l, (m, m0) in enumerate(zip(state.mu, state.mu0)):
        # shared labels are drawn once, so their terms enter via layer 0 only
        cols = slice(None) if l == 0 else slice(K, None)
        mm, pp = m[:, cols], m0[cols]
        total += float(np.sum(xlogy(mm, pp)) - np.sum(xlogy(mm, mm)))
    return total


def _elbo(state, layers, update="averaged"):
    total = 0.0
    for layer, m, tau in zip(layers, state.mu, state.tau):
        fam = layer.family
        ebar = fam.expected_natural(tau)
        S = _pair_sums(m, layer.stats)
        total += 0.5 * float(np.sum(S * ebar)) + layer.log_h
        iu = np.triu_indices(m.shape[1])
        t, eb = tau[iu], ebar[iu]
        kl = fam.log_partition(t) - fam.log_partition(layer.tau0) - np.sum((t - layer.tau0) * eb, axis=-1)
        total += float(np.sum(kl))
    return total + _label_term(state, update)


def elbo(state, graphs, update="averaged"):
    """Evidence lower bound of the current state.

    Sum over layers of the expected complete-data log-likelihood (base
    measure included), minus the KL divergence of each block posterior from
    its prior, plus the expected log label prior and label entropy, with
    shared columns counted once.
    """
    return _elbo(state, _prepare(graphs, state.tau0), update)


def map_labels(state):
    """Per-layer argmax labels and the shared flag read from layer 0."""
    labels = [np.argmax(m, axis=1) for m in state.mu]
    shared = labels[0] < state.K
    return CommunityStructure(labels, state.K), shared


def shared_disagreements(state):
    """Vertices whose shared/private status differs between layer 0 and another layer."""
    labels, shared = map_labels(state)
    bad = np.zeros(len(shared), dtype=bool)
    for g in labels.labels[1:]:
        bad |= (g < state.K) != shared
        bad |= shared & (g != labels.labels[0])
    return np.flatnonzero(bad)


def elbo_violations(trace, rel=1e-8):
    """Indices ``t`` where ``trace[t]`` drops below ``trace[t-1]`` beyond the slack."""
    trace = np.asarray(trace, dtype=float)
    if trace.size < 2:
        return []
    drop = trace[:-1] - trace[1:]
    slack = rel * np.abs(trace[:-1])
    return [int(t) + 1 for t in np.flatnonzero(drop > slack)]


def _fit_one(state, layers, options, F=None):
    if F is None:
        F = _pack_stats(layers)
    Kt = state.K_total
    packed = np.zeros((len(Kt), layers[0].n, max(Kt)))
    for l, m in enumerate(state.mu):
        packed[l, :, : Kt[l]] = m
    # the kernel updates ``packed`` in place; state.mu are views into it
    state.mu = [packed[l, :, : Kt[l]] for l in range(len(Kt))]
    converged = False
    for it in range(options.max_outer):
        before = [m.copy() for m in state.mu]
        _update_tau(state, layers)
        ebar = _ebar(state, layers)
        for _ in range(options.max_inner):
            if _sweep(state, F, ebar, options, packed) < options.tol:
                break
        state.elbo_trace.append(_elbo(state, layers, options.update))
        state.n_outer = it + 1
        moved = max(np.abs(a - b).max() for a, b in zip(state.mu, before))
        if moved < options.tol:
            converged = True
            break
    # leave tau consistent with the final memberships
    _update_tau(state, layers)
    state.converged = converged
    state.mu = [np.ascontiguousarray(m) for m in state.mu]
    return state


@dataclass
class FitResult:
    state: VariationalState
    labels: CommunityStructure
    shared: np.ndarray
    restart_elbos: list
    restart_traces: list = field(default_factory=list)

    @property
    def converged(self):
        return self.state.converged

    def to_dict(self):
        """JSON-ready layout; labels are 1-based to match the label files."""
        st = self.state
        return {
            "mu": [m.tolist() for m in st.mu],
            "tau": [t.tolist() for t in st.tau],
            "elbo_trace": [float(e) for e in st.elbo_trace],
            "labels": [(g + 1).tolist() for g in self.labels.labels],
            "shared": self.shared.astype(bool).tolist(),
            "converged": bool(st.converged),
            "seed": st.seed,
            "K": st.K,
            "K_total": st.K_total,
        }


def run(graphs, K, K_total, options=None, *, tau0=None, mu0=None, init_mu=None):
    """Fit the joint model, keeping the restart with the highest final ELBO.

    The first restart uses ``options.init``; later ones start from random
    Dirichlet memberships. Restart ``r`` draws from its own child stream of
    ``options.seed``.
    """
    options = options or InferenceOptions()
    graphs = check_multilayer(graphs)
    K, K_total = check_K(K, K_total, graphs.n, graphs.L)
    if tau0 is None:
        tau0 = [f.default_tau0 for f in graphs.families]
    layers = _prepare(graphs, tau0)
    F = _pack_stats(layers)
    streams = np.random.SeedSequence(options.seed).spawn(options.restarts)
    best, finals, traces = None, [], []
    for r, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        mode = options.init if r == 0 else "random"
        state = init_state(graphs, K, K_total, options, rng, tau0=tau0, mu0=mu0,
                           init_mu=init_mu, mode=mode)
        state.seed = options.seed
        state = _fit_one(state, layers, options, F)
        final = state.elbo_trace[-1]
        finals.append(final)
        traces.append(list(state.elbo_trace))
        bad = elbo_violations(state.elbo_trace)
        if bad:
            logger.info("ELBO decreased at outer sweeps %s (restart %d)", bad, r)
        if best is None or final > best.elbo_trace[-1]:
            best = state
    if not best.converged:
        logger.info("no restart converged within %d outer iterations", options.max_outer)
    labels, shared = map_labels(best)
    return FitResult(best, labels, shared, finals, traces)


class JointWSBM(ClusterMixin, BaseEstimator):
    """Shared and private communities in a multilayer weighted graph.

    Parameters
    ----------
    n_shared : int, default=2
        Number ``K`` of communities common to all layers.
    n_communities : int or list of int, default=4
        Total number of communities per layer (shared plus private).
    families : str or list of str, default="bernoulli"
        Edge-weight family of each layer.
    tau0 : list of array-like, optional
        Conjugate prior hyperparameters per layer; family defaults if None.
    mu0 : list of array-like, optional
        Label prior per layer; uniform if None.
    tol, max_outer, max_inner, restarts, init, damping, prior_in_mu, update
        See :class:`InferenceOptions`.
    random_state : int, default=0
        Seed of the restart streams.

    Attributes
    ----------
    mu_ : list of ndarray
        Fitted memberships, one ``(n, n_communities[l])`` array per layer.
    tau_ : list of ndarray
        Block posterior hyperparameters.
    labels_ : list of ndarray
        MAP community of every vertex in every layer (0-based).
    shared_ : ndarray of bool
        Whether each vertex sits in a shared community.
    elbo_ : float
        Final ELBO of the retained restart.
    """

    def __init__(self, n_shared=2, n_communities=4, families="bernoulli", tau0=None,
                 mu0=None, tol=1e-6, max_outer=100, max_inner=50, restarts=5,
                 init="spectral", damping=0.0, prior_in_mu=False, update="averaged",
                 random_state=0):
        self.n_shared = n_shared
        self.n_communities = n_communities
        self.families = families
        self.tau0 = tau0
        self.mu0 = mu0
        self.tol = tol
        self.max_outer = max_outer
        self.max_inner = max_inner
        self.restarts = restarts
        self.init = init
        self.damping = damping
        self.prior_in_mu = prior_in_mu
        self.update = update
        self.random_state = random_state

    def _options(self):
        return InferenceOptions(tol=self.tol, max_outer=self.max_outer,
                                max_inner=self.max_inner, restarts=self.restarts,
                                init=self.init, damping=self.damping,
                                prior_in_mu=self.prior_in_mu, update=self.update,
                                seed=0 if self.random_state is None else int(self.random_state))

    def fit(self, X, y=None, init_mu=None):
        """Fit on a list of adjacency matrices or a MultilayerGraph."""
        graphs = check_multilayer(X, self.families)
        res = run(graphs, self.n_shared, self.n_communities, self._options(),
                  tau0=self.tau0, mu0=self.mu0, init_mu=init_mu)
        st = res.state
        self.result_ = res
        self.mu_ = st.mu
        self.tau_ = st.tau
        self.labels_ = res.labels.labels
        self.shared_ = res.shared
        self.elbo_trace_ = st.elbo_trace
        self.elbo_ = st.elbo_trace[-1]
        self.converged_ = st.converged
        self.n_iter_ = st.n_outer
        return self

    def fit_predict(self, X, y=None, **kwargs):
        return self.fit(X, **kwargs).labels_
