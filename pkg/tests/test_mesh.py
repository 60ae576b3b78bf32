from __future__ import annotations

import numpy as np
import pytest

from esfrlab.mesh import (
    Mesh1D,
    NodeFamily,
    gauss_legendre,
    gauss_lobatto,
    l2_error,
    make_reference_basis,
    make_uniform_mesh,
    reference_nodes,
)


@pytest.mark.parametrize("n", range(1, 15))
def test_gauss_legendre_matches_numpy(n):
    x, w = gauss_legendre(n)
    xr, wr = np.polynomial.legendre.leggauss(n)
    assert np.allclose(x, xr, atol=1e-14) and np.allclose(w, wr, atol=1e-14)


@pytest.mark.parametrize("n", range(2, 15))
def test_gauss_lobatto_exactness(n):
    x, w = gauss_lobatto(n)
    assert x[0] == -1.0 and x[-1] == 1.0
    assert np.allclose(x, -x[::-1], atol=1e-14)
    for d in range(2 * n - 2):
        exact = 0.0 if d % 2 else 2.0 / (d + 1)
        assert abs(np.sum(w * x**d) - exact) < 1e-13


def test_quadrature_arguments():
    with pytest.raises(ValueError):
        gauss_legendre(0)
    with pytest.raises(ValueError):
        gauss_lobatto(1)


@pytest.mark.parametrize("family", list(NodeFamily))
@pytest.mark.parametrize("p", range(1, 9))
def test_reference_basis_operators(family, p):
    b = make_reference_basis(p, family)
    x = b.nodes
    poly = np.polynomial.Polynomial(np.arange(1, p + 2, dtype=float))
    u = poly(x)
    assert np.allclose(b.diff_matrix @ u, poly.deriv()(x), atol=1e-9 * p**2)
    assert b.interp_left @ u == pytest.approx(poly(-1.0))
    assert b.interp_right @ u == pytest.approx(poly(1.0))
    assert np.allclose(b.mass_matrix, b.mass_matrix.T)
    assert u @ b.mass_matrix @ u == pytest.approx((poly**2).integ()(1) - (poly**2).integ()(-1))
    assert np.sum(b.quad_weights) == pytest.approx(2.0)


def test_node_families():
    assert np.allclose(reference_nodes(3, "equi"), np.linspace(-1, 1, 4))
    assert np.allclose(reference_nodes(3, "gl"), np.polynomial.legendre.leggauss(4)[0])
    assert reference_nodes(3, "lobatto")[0] == -1.0
    assert NodeFamily.parse("equidistant") is NodeFamily.EQUIDISTANT
    with pytest.raises(ValueError):
        NodeFamily.parse("chebyshev")
    with pytest.raises(ValueError):
        make_reference_basis(0)


def test_mesh_geometry():
    m = make_uniform_mesh(0.0, 2 * np.pi, 8)
    assert m.n_elements == 8 and m.is_uniform
    assert np.allclose(m.jacobians, np.pi / 8)
    assert m.length == pytest.approx(2 * np.pi)
    x = m.node_coordinates([-1.0, 1.0])
    assert np.allclose(x[:, 0], m.boundaries[:-1]) and np.allclose(x[:, 1], m.boundaries[1:])
    assert not Mesh1D(np.array([0.0, 1.0, 3.0])).is_uniform
    with pytest.raises(ValueError):
        Mesh1D(np.array([0.0, 1.0, 1.0]))
    with pytest.raises(ValueError):
        make_uniform_mesh(1.0, 0.0, 4)
    with pytest.raises(ValueError):
        make_uniform_mesh(0.0, 1.0, 1)


@pytest.mark.parametrize("family", ["lgl", "gl", "equi"])
def test_l2_error_of_exact_polynomial(family):
    p = 3
    m = make_uniform_mesh(-1.0, 2.0, 5)
    b = make_reference_basis(p, family)
    exact = lambda x, t: x**3 - x + t  # noqa: E731
    u = exact(m.node_coordinates(b.nodes), 0.5)
    assert l2_error(m, b, u, exact, 0.5) < 1e-13
    shifted = l2_error(m, b, u + 1.0, exact, 0.5)
    assert shifted == pytest.approx(np.sqrt(3.0), rel=1e-12)


def test_l2_error_sees_interpolation_error():
    p = 2
    m = make_uniform_mesh(0.0, 2 * np.pi, 8)
    b = make_reference_basis(p)
    exact = lambda x, t: np.sin(x)  # noqa: E731
    u = exact(m.node_coordinates(b.nodes), 0.0)
    nodal = l2_error(m, b, u, exact, 0.0, n_quad=p + 1)
    assert nodal < 1e-14
    assert l2_error(m, b, u, exact, 0.0) > 1e-4
    with pytest.raises(ValueError):
        l2_error(m, b, u[:-1], exact, 0.0)
