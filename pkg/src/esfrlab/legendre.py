"""Legendre polynomials with their derivatives, plus nodal/modal transforms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from esfrlab.linalg import lu_solve


@dataclass(frozen=True)
class LegendreEval:
    degree: int
    values: np.ndarray
    derivatives: np.ndarray


def legendre_table(p: int, r, nderiv: int = 1) -> np.ndarray:
    """Evaluate Psi_0..Psi_p and their derivatives at the points ``r``.

    Returns an array of shape ``(nderiv + 1, p + 1) + np.shape(r)`` where
    entry ``[d, i]`` is the ``d``-th derivative of ``Psi_i``.  Values come
    from Bonnet's recurrence

        (i + 1) Psi_{i+1} = (2i + 1) r Psi_i - i Psi_{i-1}

    and the derivative rows from differentiating it ``d`` times,

        (i + 1) Psi^(d)_{i+1} = (2i + 1) (r Psi^(d)_i + d Psi^(d-1)_i) - i Psi^(d)_{i-1}.
    """
    if p < 0:
        raise ValueError(f"degree must be non-negative, got {p}")
    r = np.asarray(r, dtype=float)
    out = np.zeros((nderiv + 1, p + 1) + r.shape)
    out[0, 0] = 1.0
    if p >= 1:
        out[0, 1] = r
        if nderiv >= 1:
            out[1, 1] = 1.0
    for i in range(1, p):
        for d in range(nderiv + 1):
            lower = d * out[d - 1, i] if d > 0 else 0.0
            out[d, i + 1] = ((2 * i + 1) * (r * out[d, i] + lower) - i * out[d, i - 1]) / (i + 1)
    return out


def legendre_all(p: int, r: float) -> LegendreEval:
    tab = legendre_table(p, float(r), nderiv=1)
    return LegendreEval(degree=p, values=tab[0].copy(), derivatives=tab[1].copy())


def legendre_inner(i: int, j: int) -> float:
    """Exact L2 inner product of Psi_i and Psi_j over [-1, 1]."""
    if i < 0 or j < 0:
        raise ValueError("degrees must be non-negative")
    return 2.0 / (2 * i + 1) if i == j else 0.0


def leading_coefficient(p: int) -> float:
    """Coefficient a_p of r**p in Psi_p, (2p)! / (2**p (p!)**2)."""
    from math import factorial

    return factorial(2 * p) / (2**p * factorial(p) ** 2)


def vandermonde(p: int, nodes) -> np.ndarray:
    """V[j, i] = Psi_i(r_j)."""
    return legendre_table(p, np.asarray(nodes, dtype=float), nderiv=0)[0].T


def nodal_to_modal(p: int, nodal, nodes) -> np.ndarray:
    """Legendre coefficients of the degree-p interpolant of ``nodal``.

    ``nodal`` may be a vector or a matrix whose columns are separate nodal
    vectors; complex input is supported.
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.shape != (p + 1,):
        raise ValueError(f"expected {p + 1} nodes, got {nodes.shape}")
    if np.min(np.abs(np.subtract.outer(nodes, nodes)) + np.eye(p + 1)) < 1e-14:
        raise np.linalg.LinAlgError("interpolation nodes are not distinct")
    return lu_solve(vandermonde(p, nodes), np.asarray(nodal))


def modal_to_nodal(p: int, modal, nodes) -> np.ndarray:
    return vandermonde(p, nodes) @ np.asarray(modal)
