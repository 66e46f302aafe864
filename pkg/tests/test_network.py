import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from open_dgd.network import (GENERATORS, NetworkError, build_network, complete, cycle,
                              erdos_renyi, laplacian_apply, laplacian_quadratic_form,
                              pairwise_disagreement, path)


def dense_kron(net, x, d):
    return np.kron(net.laplacian, np.eye(d)) @ np.asarray(x).ravel()


def test_two_nodes():
    net = build_network([[1, 1], [1, 1]])
    np.testing.assert_array_equal(net.laplacian, [[1, -1], [-1, 1]])
    np.testing.assert_allclose(net.eigenvalues, [0, 2], atol=1e-12)
    assert net.lambda_n == pytest.approx(2.0)


def test_complete_three():
    net = complete(3)
    np.testing.assert_allclose(net.eigenvalues, [0, 3, 3], atol=1e-12)
    assert net.lambda_n == pytest.approx(3.0)


def test_path_three():
    net = path(3)
    np.testing.assert_array_equal(net.laplacian, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
    np.testing.assert_allclose(net.eigenvalues, [0, 1, 3], atol=1e-12)


def test_cycle_spectrum():
    # C_n eigenvalues 2 - 2 cos(2 pi k / n)
    n = 7
    expect = np.sort(2 - 2 * np.cos(2 * np.pi * np.arange(n) / n))
    np.testing.assert_allclose(cycle(n).eigenvalues, expect, atol=1e-12)


def test_single_agent():
    net = complete(1)
    assert net.n == 1 and net.lambda_n == 0.0
    assert np.isnan(net.lambda_2) and net.spectrally_connected


@pytest.mark.parametrize("A,msg", [
    ([[1, 1], [0, 1]], "symmetric"),
    ([[0, 1], [1, 1]], "diagonal"),
    ([[1, 0], [0, 1]], "disconnected"),
    ([[1, -1], [-1, 1]], "nonnegative"),
    ([[1, 1, 1], [1, 1, 1]], "square"),
])
def test_rejects(A, msg):
    with pytest.raises(NetworkError, match=msg):
        build_network(A)


def test_network_immutable():
    net = complete(3)
    with pytest.raises(ValueError):
        net.laplacian[0, 0] = 5


def test_erdos_renyi_reproducible_and_connected():
    a = erdos_renyi(12, 0.2, seed=4)
    b = erdos_renyi(12, 0.2, seed=4)
    np.testing.assert_array_equal(a.adjacency, b.adjacency)
    assert a.spectrally_connected
    with pytest.raises(ValueError):
        erdos_renyi(5, 0.0)


def test_quadratic_form_examples():
    net = complete(2)
    assert laplacian_quadratic_form(net, [[0, 0], [1, 0]]) == 1.0
    assert laplacian_quadratic_form(net, [0, 0, 1, 0]) == 1.0
    assert laplacian_quadratic_form(complete(3), np.tile([0.3, -2.0], (3, 1))) == pytest.approx(0, abs=1e-14)


def test_quadratic_form_matches_kron():
    rng = np.random.default_rng(0)
    net = complete(3)
    for _ in range(20):
        x = rng.standard_normal((3, 2))
        kron = float(x.ravel() @ np.kron(net.laplacian, np.eye(2)) @ x.ravel())
        assert laplacian_quadratic_form(net, x) == pytest.approx(kron, rel=1e-12)
        assert pairwise_disagreement(net, x) == pytest.approx(kron, rel=1e-12)


def test_apply_examples():
    net = complete(2)
    np.testing.assert_array_equal(laplacian_apply(net, [0.0, 1.0]), [-1.0, 1.0])
    np.testing.assert_array_equal(laplacian_apply(net, np.ones((2, 3))), np.zeros((2, 3)))


def test_apply_dimension_mismatch():
    with pytest.raises(ValueError):
        laplacian_apply(complete(3), np.zeros(5))
    with pytest.raises(ValueError):
        laplacian_quadratic_form(complete(3), np.zeros((2, 2)))


def _random_network(seed, n):
    rng = np.random.default_rng(seed)
    kind = sorted(GENERATORS)[seed % len(GENERATORS)]
    w = float(rng.uniform(0.1, 3.0))
    s = float(rng.uniform(0.1, 3.0))
    if kind == "erdos_renyi":
        return erdos_renyi(n, 0.4, seed=seed, edge_weight=w, self_weight=s)
    return GENERATORS[kind](n, edge_weight=w, self_weight=s)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 12), d=st.integers(1, 4))
def test_spectral_invariants(seed, n, d):
    net = _random_network(seed, n)
    assert abs(net.eigenvalues[0]) <= 1e-9
    assert net.eigenvalues.min() >= -1e-9
    np.testing.assert_allclose(net.laplacian @ np.ones(n), 0, atol=1e-10)
    assert net.spectrally_connected
    x = np.random.default_rng(seed).standard_normal((n, d))
    np.testing.assert_allclose(laplacian_apply(net, x).ravel(), dense_kron(net, x, d), atol=1e-12)
    q = laplacian_quadratic_form(net, x)
    assert q == pytest.approx(float(np.sum(x * laplacian_apply(net, x))), rel=1e-10, abs=1e-12)
    assert q >= -1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_apply_linear(seed, a, b):
    net = _random_network(seed, 6)
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, 6, 2))
    lhs = laplacian_apply(net, a * x + b * y)
    rhs = a * laplacian_apply(net, x) + b * laplacian_apply(net, y)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_disconnected_has_zero_gap():
    # graph search and spectrum agree: two blocks give a second zero eigenvalue
    A = np.kron(np.eye(2), np.ones((2, 2)))
    with pytest.raises(NetworkError):
        build_network(A)
    L = np.diag(A.sum(1)) - A
    assert np.linalg.eigvalsh(L)[1] < 1e-9
