"""Input checks shared by the estimators, the inference routines and the CLI."""

import numpy as np
from sklearn.utils import check_array

from .exponfam import DomainError, get_family
from .generator import MultilayerGraph

__all__ = ["InvalidConfiguration", "check_adjacency", "check_multilayer", "check_K"]


class InvalidConfiguration(ValueError):
    """Community counts or options inconsistent with the data."""


def check_adjacency(A, family=None, sym_tol=1e-9, name="adjacency"):
    """Return ``A`` as a float array after checking shape, symmetry and weights."""
    A = check_array(A, dtype=np.float64, ensure_2d=True,
                    ensure_min_samples=1, ensure_min_features=1)
    n, m = A.shape
    if n != m:
        raise ValueError(f"{name} must be square, got {A.shape}")
    diff = np.abs(A - A.T)
    if diff.max(initial=0.0) > sym_tol:
        i, j = np.unravel_index(np.argmax(diff), diff.shape)
        i, j = min(i, j), max(i, j)
        raise ValueError(f"{name} is not symmetric: entries ({i}, {j}) and ({j}, {i}) "
                         f"differ ({A[i, j]!r} vs {A[j, i]!r})")
    if np.any(np.diag(A) != 0):
        raise ValueError(f"{name} has a nonzero diagonal; self-loops are not modelled")
    if family is not None:
        fam = get_family(family)
        ok = fam.admissible(A)
        if not np.all(ok):
            i, j = np.argwhere(~ok)[0]
            raise DomainError(f"{name}: weight {float(A[i, j])!r} at ({i}, {j}) is not "
                              f"admissible for a {fam.kind} layer")
    return A


def check_multilayer(X, families=None):
    """Coerce ``X`` (a MultilayerGraph or a list of matrices) to a checked graph."""
    if isinstance(X, MultilayerGraph):
        layers, fams = X.layers, X.families
    else:
        if isinstance(X, np.ndarray) and X.ndim == 2:
            X = [X]
        layers = list(X)
        fams = families
        if fams is None:
            raise ValueError("families must be given for raw adjacency input")
        if isinstance(fams, str):
            fams = [fams] * len(layers)
    if len(fams) != len(layers):
        raise ValueError(f"{len(layers)} layers but {len(fams)} families")
    fams = [get_family(f) for f in fams]
    checked = [check_adjacency(A, f, name=f"layer {l}")
               for l, (A, f) in enumerate(zip(layers, fams))]
    n = checked[0].shape[0]
    if any(A.shape[0] != n for A in checked):
        raise ValueError("all layers must share the same vertex set")
    return MultilayerGraph(checked, fams)


def check_K(K, K_total, n, L):
    if np.isscalar(K_total):
        K_total = [int(K_total)] * L
    K_total = [int(k) for k in K_total]
    if len(K_total) != L:
        raise InvalidConfiguration(f"need {L} community counts, got {len(K_total)}")
    if min(K_total) < 1:
        raise InvalidConfiguration("every layer needs at least one community")
    if max(K_total) > n:
        raise InvalidConfiguration(f"K_total={max(K_total)} exceeds the vertex count {n}")
    if not 0 <= K <= min(K_total):
        raise InvalidConfiguration(f"shared count K={K} must lie in [0, {min(K_total)}]")
    return int(K), K_total
