"""
Exponential-family edge-weight models with conjugate priors.

Every family is written in the vector form

    p(x | theta) = h(x) exp{T(x) . eta(theta)}

with a conjugate prior p(theta | tau) = exp{tau . eta(theta)} / Z(tau).
The quantity that drives the variational updates is the posterior
expectation of the natural parameter, E[eta(theta)] = grad log Z(tau).

Two families are shipped:

    Bernoulli   T(x) = (x, 1)   eta = (log theta/(1-theta), log(1-theta))
                Z(tau) = B(tau_1 + 1, tau_2 - tau_1 + 1)       (Beta prior)
    Poisson     T(x) = (x, 1)   eta = (log theta, -theta)
                Z(tau) = Gamma(tau_1 + 1) / tau_2^(tau_1 + 1)  (Gamma prior)

New families subclass :class:`WeightFamily` and implement the abstract
methods; nothing else in the package special-cases a family.
"""

from __future__ import annotations

import numpy as np
from scipy import special

__all__ = [
    "DomainError",
    "WeightFamily",
    "Bernoulli",
    "Poisson",
    "BERNOULLI",
    "POISSON",
    "get_family",
    "sufficient_statistic",
    "log_partition",
    "expected_natural",
    "sample_param",
    "sample_weight",
]


class DomainError(ValueError):
    """Raised when a weight, parameter or hyperparameter is outside its domain."""


class WeightFamily:
    """Base class for an exponential-family edge-weight distribution.

    Subclasses define ``kind``, ``stat_dim`` and the abstract methods below.
    Instances are stateless, so module-level singletons are shared freely.
    """

    kind: str = ""
    stat_dim: int = 0
    # Dimension of theta itself, used when counting free parameters.
    param_dim: int = 1

    def __repr__(self):
        return f"{type(self).__name__}()"

    def __eq__(self, other):
        return type(self) is type(other)

    def __hash__(self):
        return hash(type(self))

    # weights ---------------------------------------------------------
    def admissible(self, x):
        """Elementwise mask of admissible weights."""
        raise NotImplementedError

    def check_weights(self, x):
        x = np.asarray(x, dtype=float)
        ok = self.admissible(x)
        if not np.all(ok):
            bad = x[~ok].ravel()[0]
            raise DomainError(f"weight {float(bad)!r} is not admissible for {self.kind}")
        return x

    def stats(self, x):
        """Sufficient statistics, stacked on a new leading axis of length stat_dim."""
        raise NotImplementedError

    def log_base_measure(self, x):
        """log h(x), elementwise."""
        raise NotImplementedError

    # hyperparameters -------------------------------------------------
    def admissible_tau(self, tau):
        raise NotImplementedError

    def check_tau(self, tau):
        tau = np.asarray(tau, dtype=float)
        if tau.shape[-1] != self.stat_dim:
            raise DomainError(
                f"{self.kind} hyperparameters need length {self.stat_dim}, "
                f"got shape {tau.shape}")
        if not np.all(self.admissible_tau(tau)):
            raise DomainError(f"hyperparameters {tau.tolist()} are not admissible "
                              f"for {self.kind}")
        return tau

    def log_partition(self, tau):
        """log Z(tau); vectorized over leading axes of ``tau``."""
        raise NotImplementedError

    def expected_natural(self, tau):
        """E[eta(theta)] under the conjugate density, i.e. grad log Z(tau)."""
        raise NotImplementedError

    def natural(self, theta):
        """eta(theta), stacked on a trailing axis."""
        raise NotImplementedError

    def posterior_mean(self, tau):
        """E[theta] under the conjugate density."""
        raise NotImplementedError

    # parameters ------------------------------------------------------
    def check_theta(self, theta, closed=False):
        raise NotImplementedError

    def sample_param(self, tau, rng, size=None):
        raise NotImplementedError

    def sample_weight(self, theta, rng):
        raise NotImplementedError

    # default prior ---------------------------------------------------
    default_tau0: tuple = ()


class Bernoulli(WeightFamily):
    kind = "bernoulli"
    stat_dim = 2
    default_tau0 = (0.0, 0.0)

    def admissible(self, x):
        x = np.asarray(x, dtype=float)
        return (x == 0) | (x == 1)

    def stats(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([x, np.ones_like(x)])

    def log_base_measure(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def admissible_tau(self, tau):
        tau = np.asarray(tau, dtype=float)
        t1, t2 = tau[..., 0], tau[..., 1]
        return (t1 > -1) & (t2 - t1 > -1) & np.isfinite(t1) & np.isfinite(t2)

    def _beta_args(self, tau):
        tau = np.asarray(tau, dtype=float)
        return tau[..., 0] + 1.0, tau[..., 1] - tau[..., 0] + 1.0

    def log_partition(self, tau):
        a, b = self._beta_args(tau)
        return special.betaln(a, b)

    def expected_natural(self, tau):
        a, b = self._beta_args(tau)
        dab = special.digamma(a + b)
        db = special.digamma(b)
        return np.stack([special.digamma(a) - db, db - dab], axis=-1)

    def natural(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([np.log(theta) - np.log1p(-theta), np.log1p(-theta)], axis=-1)

    def posterior_mean(self, tau):
        a, b = self._beta_args(tau)
        return a / (a + b)

    def check_theta(self, theta, closed=False):
        theta = np.asarray(theta, dtype=float)
        ok = (theta >= 0) & (theta <= 1) if closed else (theta > 0) & (theta < 1)
        if not np.all(ok):
            raise DomainError(f"Bernoulli parameter outside "
                              f"{'[0, 1]' if closed else '(0, 1)'}: "
                              f"{theta[~ok].ravel()[0]!r}")
        return theta

    def sample_param(self, tau, rng, size=None):
        self.check_tau(tau)
        a, b = self._beta_args(tau)
        return rng.beta(a, b, size=size)

    def sample_weight(self, theta, rng):
        theta = self.check_theta(theta, closed=True)
        return (rng.random(np.shape(theta)) < theta).astype(float)


class Poisson(WeightFamily):
    kind = "poisson"
    stat_dim = 2
    default_tau0 = (0.0, 0.1)

    def admissible(self, x):
        x = np.asarray(x, dtype=float)
        return (x >= 0) & (x == np.floor(x)) & np.isfinite(x)

    def stats(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([x, np.ones_like(x)])

    def log_base_measure(self, x):
        return -special.gammaln(np.asarray(x, dtype=float) + 1.0)

    def admissible_tau(self, tau):
        tau = np.asarray(tau, dtype=float)
        t1, t2 = tau[..., 0], tau[..., 1]
        return (t1 > -1) & (t2 > 0) & np.isfinite(t1) & np.isfinite(t2)

    def log_partition(self, tau):
        tau = np.asarray(tau, dtype=float)
        shape = tau[..., 0] + 1.0
        return special.gammaln(shape) - shape * np.log(tau[..., 1])

    def expected_natural(self, tau):
        tau = np.asarray(tau, dtype=float)
        shape, rate = tau[..., 0] + 1.0, tau[..., 1]
        return np.stack([special.digamma(shape) - np.log(rate), -shape / rate], axis=-1)

    def natural(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([np.log(theta), -theta], axis=-1)

    def posterior_mean(self, tau):
        tau = np.asarray(tau, dtype=float)
        return (tau[..., 0] + 1.0) / tau[..., 1]

    def check_theta(self, theta, closed=False):
        theta = np.asarray(theta, dtype=float)
        ok = (theta >= 0) if closed else (theta > 0)
        ok &= np.isfinite(theta)
        if not np.all(ok):
            raise DomainError(f"Poisson rate out of range: {theta[~ok].ravel()[0]!r}")
        return theta

    def sample_param(self, tau, rng, size=None):
        tau = self.check_tau(tau)
        return rng.gamma(tau[..., 0] + 1.0, 1.0 / tau[..., 1], size=size)

    def sample_weight(self, theta, rng):
        theta = self.check_theta(theta, closed=True)
        return rng.poisson(theta).astype(float)


BERNOULLI = Bernoulli()
POISSON = Poisson()

_FAMILIES = {"bernoulli": BERNOULLI, "poisson": POISSON}


def get_family(family):
    """Resolve a family instance or a case-insensitive name."""
    if isinstance(family, WeightFamily):
        return family
    try:
        return _FAMILIES[str(family).lower()]
    except KeyError:
        raise ValueError(f"unknown weight family {family!r}; "
                         f"choose from {sorted(_FAMILIES)}") from None


def sufficient_statistic(family, weight):
    """T(weight) as a vector of length ``family.stat_dim``."""
    family = get_family(family)
    w = family.check_weights(weight)
    return family.stats(w)


def log_partition(family, tau):
    family = get_family(family)
    return family.log_partition(family.check_tau(tau))


def expected_natural(family, tau):
    """Posterior-mean natural parameter, ``grad log Z(tau)``."""
    family = get_family(family)
    return family.expected_natural(family.check_tau(tau))


def sample_param(family, tau, rng):
    return get_family(family).sample_param(tau, rng)


def sample_weight(family, theta, rng):
    return get_family(family).sample_weight(theta, rng)
