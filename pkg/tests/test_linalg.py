from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esfrlab.linalg import (
    MAX_EIG_SIZE,
    EigenConvergenceError,
    SingularMatrixError,
    eig,
    inv,
    lu_solve,
)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**31 - 1), st.booleans())
def test_lu_solve_residual(n, seed, cplx):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + n * np.eye(n)
    b = rng.normal(size=n)
    if cplx:
        a = a + 1j * rng.normal(size=(n, n))
    x = lu_solve(a, b)
    assert np.linalg.norm(a @ x - b) <= 1e-12 * np.linalg.norm(a) * np.linalg.norm(x) + 1e-14


def test_lu_solve_matrix_rhs_and_inverse():
    a = np.array([[4.0, 1.0], [2.0, 3.0]])
    assert np.allclose(inv(a) @ a, np.eye(2))
    x = lu_solve(a, np.eye(2))
    assert np.allclose(a @ x, np.eye(2))


def test_singular_and_shape_errors():
    with pytest.raises(SingularMatrixError):
        lu_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))
    with pytest.raises(SingularMatrixError):
        lu_solve(np.zeros((2, 2)), np.ones(2))
    with pytest.raises(ValueError):
        lu_solve(np.ones((2, 3)), np.ones(2))
    with pytest.raises(ValueError):
        eig(np.ones((2, 3)))
    with pytest.raises(ValueError):
        eig(np.eye(MAX_EIG_SIZE + 1))
    assert issubclass(SingularMatrixError, np.linalg.LinAlgError)
    assert issubclass(EigenConvergenceError, np.linalg.LinAlgError)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, MAX_EIG_SIZE), st.integers(0, 2**31 - 1))
def test_eig_contract(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    dec = eig(a)
    v, w = dec.eigenvectors, dec.eigenvalues
    assert np.allclose(np.linalg.norm(v, axis=0), 1.0)
    assert np.max(np.linalg.norm(a @ v - v * w, axis=0)) <= 1e-9 * np.linalg.norm(a, 2)
    assert dec.residual <= 1e-9 * np.linalg.norm(a, 2)


def test_eig_known_spectrum():
    a = np.array([[0.0, 1.0], [-1.0, 0.0]])
    w = eig(a).eigenvalues
    assert np.allclose(np.sort(w.imag), [-1.0, 1.0]) and np.allclose(w.real, 0.0)
