"""Small dense linear algebra with residual-checked contracts.

Thin wrappers over LAPACK (through numpy) that enforce the accuracy
guarantees the rest of the package relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import warnings

import numpy as np
import scipy.linalg as sla

PIVOT_RTOL = 1e-13
EIG_RTOL = 1e-9
MAX_EIG_SIZE = 16


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class EigenConvergenceError(np.linalg.LinAlgError):
    pass


def lu_solve(a, b) -> np.ndarray:
    """Solve ``a x = b`` with partial pivoting.

    Raises :class:`SingularMatrixError` when the smallest pivot falls below
    ``PIVOT_RTOL * ||a||``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    with warnings.catch_warnings():
        # singularity is reported below as SingularMatrixError
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=True)
    norm = np.linalg.norm(a, np.inf)
    if norm == 0.0 or np.min(np.abs(np.diag(lu))) <= PIVOT_RTOL * norm:
        raise SingularMatrixError("matrix is singular to working precision")
    return sla.lu_solve((lu, piv), b)


def inv(a) -> np.ndarray:
    a = np.asarray(a)
    return lu_solve(a, np.eye(a.shape[0], dtype=a.dtype))


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float


def eig(a) -> EigenDecomposition:
    """Eigenvalues and unit-norm eigenvectors of a small square matrix."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if n > MAX_EIG_SIZE:
        raise ValueError(f"matrix too large for the dense eigensolver ({n} > {MAX_EIG_SIZE})")
    try:
        w, v = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(str(exc)) from exc
    v = v / np.linalg.norm(v, axis=0)
    residual = float(np.max(np.linalg.norm(a @ v - v * w, axis=0))) if n else 0.0
    scale = max(np.linalg.norm(a, 2), np.finfo(float).tiny)
    if residual > EIG_RTOL * scale:
        raise EigenConvergenceError(f"eigen residual {residual:.3e} exceeds {EIG_RTOL:g}*||A||")
    return EigenDecomposition(eigenvalues=w, eigenvectors=v, residual=residual)
