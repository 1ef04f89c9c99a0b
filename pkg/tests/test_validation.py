import numpy as np
import pytest

from jointsbm.exponfam import DomainError
from jointsbm.generator import MultilayerGraph
from jointsbm.validation import InvalidConfiguration, check_adjacency, check_K, check_multilayer


def test_check_adjacency_accepts_symmetric():
    A = np.array([[0, 1], [1, 0]])
    out = check_adjacency(A, "bernoulli")
    assert out.dtype == float


def test_asymmetry_names_pair():
    A = np.zeros((3, 3))
    A[0, 2] = 1
    with pytest.raises(ValueError, match=r"\(0, 2\)"):
        check_adjacency(A)


def test_nonsquare():
    with pytest.raises(ValueError):
        check_adjacency(np.zeros((2, 3)))


def test_domain_error_for_weight_three():
    A = np.array([[0, 3], [3, 0]])
    with pytest.raises(DomainError):
        check_adjacency(A, "bernoulli")
    check_adjacency(A, "poisson")


def test_check_multilayer_forms():
    A = np.zeros((3, 3))
    g = check_multilayer([A, A], ["bernoulli", "poisson"])
    assert isinstance(g, MultilayerGraph) and g.L == 2
    assert check_multilayer(A, "bernoulli").L == 1
    with pytest.raises(ValueError):
        check_multilayer([A, np.zeros((4, 4))], "bernoulli")
    with pytest.raises(ValueError):
        check_multilayer([A, A])


def test_check_K():
    assert check_K(2, 4, 10, 2) == (2, [4, 4])
    with pytest.raises(InvalidConfiguration):
        check_K(3, [4, 2], 10, 2)
    with pytest.raises(InvalidConfiguration):
        check_K(1, [11, 4], 10, 2)
    with pytest.raises(InvalidConfiguration):
        check_K(1, [2, 2, 2], 10, 2)
