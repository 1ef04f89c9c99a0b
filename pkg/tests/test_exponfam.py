import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from jointsbm import exponfam
from jointsbm.exponfam import BERNOULLI, POISSON, DomainError, get_family


def random_tau(family, rng, size):
    """Admissible hyperparameters kept away from the boundary."""
    if family is BERNOULLI:
        a = rng.uniform(0.5, 30, size)
        b = rng.uniform(0.5, 30, size)
        return np.stack([a - 1, a + b - 2], axis=-1)
    shape = rng.uniform(0.5, 40, size)
    rate = rng.uniform(0.2, 20, size)
    return np.stack([shape - 1, rate], axis=-1)


def fd_gradient(f, tau, h=1e-3):
    """Fourth-order central differences."""
    grad = np.zeros_like(tau)
    for d in range(tau.shape[-1]):
        e = np.zeros_like(tau)
        e[..., d] = h
        grad[..., d] = (-f(tau + 2 * e) + 8 * f(tau + e) - 8 * f(tau - e) + f(tau - 2 * e)) / (12 * h)
    return grad


def conjugate_density(family, tau):
    eta = lambda t: family.natural(t)
    logz = family.log_partition(tau)
    return lambda t: np.exp(np.dot(tau, eta(t)) - logz)


@pytest.mark.parametrize("family", [BERNOULLI, POISSON], ids=["bernoulli", "poisson"])
def test_expected_natural_is_gradient(family):
    rng = np.random.default_rng(0)
    tau = random_tau(family, rng, 100)
    got = family.expected_natural(tau)
    want = fd_gradient(family.log_partition, tau)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-6)


@pytest.mark.parametrize("family", [BERNOULLI, POISSON], ids=["bernoulli", "poisson"])
def test_conjugate_density_normalizes(family):
    rng = np.random.default_rng(1)
    upper = 1.0 if family is BERNOULLI else np.inf
    for tau in random_tau(family, rng, 10):
        total, _ = integrate.quad(conjugate_density(family, tau), 0, upper,
                                  epsabs=1e-12, epsrel=1e-10, limit=200)
        assert abs(total - 1) < 1e-6


@pytest.mark.parametrize("family", [BERNOULLI, POISSON], ids=["bernoulli", "poisson"])
def test_expected_natural_matches_quadrature(family):
    rng = np.random.default_rng(2)
    upper = 1.0 if family is BERNOULLI else np.inf
    for tau in random_tau(family, rng, 3):
        dens = conjugate_density(family, tau)
        want = [integrate.quad(lambda t: family.natural(t)[d] * dens(t), 0, upper,
                               epsabs=1e-12, limit=200)[0] for d in range(2)]
        np.testing.assert_allclose(family.expected_natural(tau), want, atol=1e-7)


def test_bernoulli_closed_form():
    # tau = (0, 0) is the uniform Beta(1, 1)
    np.testing.assert_allclose(BERNOULLI.log_partition([0.0, 0.0]), 0.0, atol=1e-15)
    np.testing.assert_allclose(BERNOULLI.expected_natural([0.0, 0.0]), [0.0, -1.0], atol=1e-12)
    assert BERNOULLI.posterior_mean([3.0, 4.0]) == pytest.approx(4 / 6)


def test_poisson_closed_form():
    # Gamma(1, 1): E[log theta] = -euler_gamma, E[-theta] = -1
    np.testing.assert_allclose(POISSON.log_partition([0.0, 1.0]), 0.0, atol=1e-15)
    np.testing.assert_allclose(POISSON.expected_natural([0.0, 1.0]), [-np.euler_gamma, -1.0],
                               atol=1e-12)


@pytest.mark.parametrize("family,x,stat", [
    (BERNOULLI, 1.0, [1.0, 1.0]),
    (BERNOULLI, 0.0, [0.0, 1.0]),
    (POISSON, 3.0, [3.0, 1.0]),
])
def test_sufficient_statistic(family, x, stat):
    np.testing.assert_array_equal(exponfam.sufficient_statistic(family, x), stat)


@pytest.mark.parametrize("family,x", [(BERNOULLI, 3.0), (BERNOULLI, 0.5), (POISSON, -1.0),
                                      (POISSON, 1.5)])
def test_inadmissible_weight(family, x):
    with pytest.raises(DomainError):
        exponfam.sufficient_statistic(family, x)


@pytest.mark.parametrize("family,tau", [(BERNOULLI, [-1.0, 0.0]), (BERNOULLI, [2.0, 0.5]),
                                        (POISSON, [0.0, 0.0]), (POISSON, [-2.0, 1.0])])
def test_inadmissible_tau(family, tau):
    with pytest.raises(DomainError):
        exponfam.log_partition(family, tau)
    with pytest.raises(DomainError):
        exponfam.expected_natural(family, tau)


def test_get_family():
    assert get_family("Bernoulli") is BERNOULLI
    assert get_family(POISSON) is POISSON
    with pytest.raises(ValueError):
        get_family("normal")


@pytest.mark.parametrize("family,theta", [(BERNOULLI, 0.3), (POISSON, 2.5)])
def test_sample_weight_mean(family, theta):
    rng = np.random.default_rng(3)
    w = family.sample_weight(np.full(200_000, theta), rng)
    assert np.all(family.admissible(w))
    assert abs(w.mean() - theta) < 5 * np.sqrt(max(theta, theta * (1 - theta)) / w.size)


@pytest.mark.parametrize("family", [BERNOULLI, POISSON], ids=["bernoulli", "poisson"])
def test_sample_param_mean(family):
    rng = np.random.default_rng(4)
    tau = random_tau(family, rng, 1)[0]
    draws = family.sample_param(np.broadcast_to(tau, (100_000, 2)), rng)
    mean = family.posterior_mean(tau)
    assert abs(draws.mean() - mean) < 5 * draws.std() / np.sqrt(draws.size)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0.05, 200), b=st.floats(0.05, 200))
def test_bernoulli_expected_natural_consistent(a, b):
    # E[logit] + E[log(1-theta)] = E[log theta] < 0 and both components finite
    en = BERNOULLI.expected_natural([a - 1, a + b - 2])
    assert np.all(np.isfinite(en))
    assert en[0] + en[1] < 0
    assert en[1] < 0
