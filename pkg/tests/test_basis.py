"""Legendre recurrence, orthonormal basis, and quadrature exactness."""

import numpy as np
import pytest

from landau_dsmc.basis import PolyBasis, basis_eval, gauss_nodes, legendre_P


def test_legendre_low_orders():
    assert legendre_P(0, 0.3) == 1.0
    assert legendre_P(1, 0.3) == 0.3
    # degree-5 closed form: (63 x^5 - 70 x^3 + 15 x) / 8
    x = 0.7
    exact = (63 * x**5 - 70 * x**3 + 15 * x) / 8.0
    assert legendre_P(5, x) == pytest.approx(exact, abs=1e-15)


def test_legendre_vectorized_and_endpoints():
    x = np.linspace(-1, 1, 11)
    for l in range(8):
        assert legendre_P(l, 1.0) == pytest.approx(1.0, abs=1e-14)
        assert legendre_P(l, -1.0) == pytest.approx((-1.0) ** l, abs=1e-14)
    assert legendre_P(3, x).shape == x.shape


def test_legendre_negative_degree_rejected():
    with pytest.raises(ValueError):
        legendre_P(-1, 0.0)


def test_basis_mode_zero_is_one():
    b = PolyBasis(4)
    assert b.eval(0, 0.42) == 1.0
    assert basis_eval(b, 1, 0.5) == pytest.approx(0.0, abs=1e-15)


def test_basis_mode_out_of_range():
    with pytest.raises(ValueError):
        PolyBasis(3).eval(4, 0.5)


def test_basis_normalization_by_quadrature():
    b = PolyBasis(2)
    q = gauss_nodes(8)
    val = np.sum(q.weights * b.eval(2, q.nodes) ** 2)
    assert val == pytest.approx(1.0, abs=1e-14)


def test_orthonormality_full_table():
    order, n_q = 30, 64
    b = PolyBasis(order)
    q = gauss_nodes(n_q)
    psi = b.table(q.nodes)
    gram = psi.T @ (q.weights[:, None] * psi)
    assert np.abs(gram - np.eye(order + 1)).max() < 1e-12


def test_table_matches_eval():
    b = PolyBasis(6)
    z = np.array([0.0, 0.2, 0.9, 1.0])
    psi = b.table(z)
    for k in range(7):
        assert np.allclose(psi[:, k], b.eval(k, z), atol=1e-14)


def test_gauss_single_node_is_midpoint():
    q = gauss_nodes(1)
    assert q.nodes[0] == pytest.approx(0.5)
    assert q.weights[0] == pytest.approx(1.0)


def test_gauss_two_nodes_closed_form():
    q = gauss_nodes(2)
    off = 1.0 / (2.0 * np.sqrt(3.0))
    assert np.allclose(np.sort(q.nodes), [0.5 - off, 0.5 + off], atol=1e-15)
    assert np.allclose(q.weights, [0.5, 0.5], atol=1e-15)


def test_gauss_exactness_degree_seven():
    q = gauss_nodes(4)
    assert np.sum(q.weights * q.nodes**6) == pytest.approx(1.0 / 7.0, abs=1e-14)


def test_gauss_weights_normalized_and_exact():
    for n_q in (3, 9, 33, 64):
        q = gauss_nodes(n_q)
        assert np.sum(q.weights) == pytest.approx(1.0, abs=1e-13)
        assert np.all(q.weights > 0)
        assert np.all((q.nodes > 0) & (q.nodes < 1))
        for p in range(2 * n_q):
            val = np.sum(q.weights * q.nodes**p)
            assert val == pytest.approx(1.0 / (p + 1), rel=1e-12)


def test_gauss_rejects_zero_nodes():
    with pytest.raises(ValueError):
        gauss_nodes(0)
