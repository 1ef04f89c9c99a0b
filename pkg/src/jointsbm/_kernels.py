"""Compiled vertex sweep used by the fitting loop.

Layers are packed into padded arrays so one kernel handles any mix of
community counts and statistic dimensions:

    F      (L, n, D*n)   stacked sufficient-statistic rows, zero padded
    E      (L, D, Km, Km) expected natural parameters, zero padded
    mu     (L, n, Km)    memberships, padded columns held at 0
    Kl     (L,)          true column counts
    prior  (L, Km)       log label prior added to the scores (zeros if off)

``coupled`` switches from the layer-averaged shared scores to exact
coordinate ascent on the family where a vertex is shared with one set of
probabilities in every layer: the shared logit sums the layers and the
private logit sums each layer's log-sum-exp over its private columns.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _refresh(W, E, mu, l, i, n, D, k_l):
    for d in range(D):
        for k in range(k_l):
            acc = 0.0
            for b in range(k_l):
                acc += mu[l, i, b] * E[l, d, k, b]
            W[l, d * n + i, k] = acc


@njit(cache=True)
def sweep(F, E, mu, Kl, K, prior, damping, coupled):
    L, n, Km = mu.shape
    D = E.shape[1]
    # W[l, d*n + j, k] = sum_b mu[l, j, b] * E[l, d, k, b]
    W = np.zeros((L, D * n, Km))
    for l in range(L):
        for d in range(D):
            for j in range(n):
                for k in range(Kl[l]):
                    acc = 0.0
                    for b in range(Kl[l]):
                        acc += mu[l, j, b] * E[l, d, k, b]
                    W[l, d * n + j, k] = acc
    c = np.zeros((L, Km))
    new = np.zeros(Km)
    shared = np.zeros(max(K, 1))
    delta = 0.0
    for i in range(n):
        for l in range(L):
            c[l] = np.dot(F[l, i], W[l])
        if coupled:
            # private logit: sum over layers of log-sum-exp of private scores
            priv = 0.0
            for l in range(L):
                top = -np.inf
                for k in range(K, Kl[l]):
                    c[l, k] += prior[l, k]
                    if c[l, k] > top:
                        top = c[l, k]
                if not np.isfinite(top):
                    priv = -np.inf
                    continue
                tot = 0.0
                for k in range(K, Kl[l]):
                    tot += np.exp(c[l, k] - top)
                priv += top + np.log(tot)
            top = priv
            for k in range(K):
                acc = prior[0, k]
                for l in range(L):
                    acc += c[l, k]
                shared[k] = acc
                if acc > top:
                    top = acc
            if not np.isfinite(top):
                return -1.0 - i
            tot = np.exp(priv - top)
            for k in range(K):
                shared[k] = np.exp(shared[k] - top)
                tot += shared[k]
            rho = np.exp(priv - top) / tot
            for l in range(L):
                ptop = -np.inf
                for k in range(K, Kl[l]):
                    if c[l, k] > ptop:
                        ptop = c[l, k]
                ptot = 0.0
                for k in range(K, Kl[l]):
                    new[k] = np.exp(c[l, k] - ptop) if rho > 0 else 0.0
                    ptot += new[k]
                for k in range(Kl[l]):
                    if k < K:
                        v = shared[k] / tot
                    elif rho > 0:
                        v = rho * new[k] / ptot
                    else:
                        v = 0.0
                    v = (1.0 - damping) * v + damping * mu[l, i, k]
                    dv = abs(v - mu[l, i, k])
                    if dv > delta:
                        delta = dv
                    mu[l, i, k] = v
                _refresh(W, E, mu, l, i, n, D, Kl[l])
            continue
        for k in range(K):
            acc = 0.0
            for l in range(L):
                acc += c[l, k]
            acc /= L
            for l in range(L):
                c[l, k] = acc
        for l in range(L):
            top = -np.inf
            for k in range(Kl[l]):
                c[l, k] += prior[l, k]
                if c[l, k] > top:
                    top = c[l, k]
            if not np.isfinite(top):
                return -1.0 - i
            tot = 0.0
            for k in range(Kl[l]):
                new[k] = np.exp(c[l, k] - top)
                tot += new[k]
            for k in range(Kl[l]):
                v = (1.0 - damping) * new[k] / tot + damping * mu[l, i, k]
                dv = abs(v - mu[l, i, k])
                if dv > delta:
                    delta = dv
                mu[l, i, k] = v
            _refresh(W, E, mu, l, i, n, D, Kl[l])
    return delta
