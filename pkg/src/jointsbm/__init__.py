"""Joint community detection in multilayer weighted graphs.

Layers share a set of communities and may each carry private ones; edge
weights follow a per-layer exponential family with a conjugate prior, and
memberships are fitted by mean-field variational Bayes.
"""

from .baselines import SpectralBaseline, SpectralOptions, single_layer_vb, spectral_clustering
from .exponfam import BERNOULLI, POISSON, DomainError, get_family
from .generator import CommunityStructure, GeneratorConfig, MultilayerGraph, planted_theta, sample
from .inference import (DegenerateRowError, FitResult, InferenceOptions, JointWSBM,
                        VariationalState, elbo, run)
from .selection import bic, modularity, nmi, select_K_shared, select_K_total, select_model
from .validation import InvalidConfiguration

__version__ = "0.1.0"

__all__ = [
    "BERNOULLI",
    "POISSON",
    "CommunityStructure",
    "DegenerateRowError",
    "DomainError",
    "FitResult",
    "GeneratorConfig",
    "InferenceOptions",
    "InvalidConfiguration",
    "JointWSBM",
    "MultilayerGraph",
    "SpectralBaseline",
    "SpectralOptions",
    "VariationalState",
    "bic",
    "elbo",
    "get_family",
    "modularity",
    "nmi",
    "planted_theta",
    "run",
    "sample",
    "select_K_shared",
    "select_K_total",
    "select_model",
    "single_layer_vb",
    "spectral_clustering",
]
