"""Interface traces and the LDG/IP/BR2 viscous fluxes, including the BR2 lifting operator.

Sign conventions: on an edge, the ``minus`` side is the element to the
left and the ``plus`` side the element to the right; the jump is
``minus - plus``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from esfrlab.correction import g_left, g_right, stability_gap
from esfrlab.linalg import lu_solve
from esfrlab.mesh import ReferenceBasis


class FluxFamily(str, Enum):
    LDG = "ldg"
    IP = "ip"
    BR2 = "br2"

    @classmethod
    def parse(cls, value) -> "FluxFamily":
        return value if isinstance(value, cls) else cls(str(value).strip().lower())


@dataclass(frozen=True)
class FluxChoice:
    """Numerical flux family and its penalty.

    ``tau`` is the penalty for LDG and IP, ``s`` for BR2.  Either may be a
    scalar or a per-edge array.
    """

    family: FluxFamily
    tau: float | np.ndarray = 0.0
    s: float | np.ndarray = 0.0
    beta: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "family", FluxFamily.parse(self.family))

    @property
    def penalty(self):
        return self.s if self.family is FluxFamily.BR2 else self.tau

    def with_penalty(self, value) -> "FluxChoice":
        if self.family is FluxFamily.BR2:
            return FluxChoice(self.family, tau=self.tau, s=value, beta=self.beta)
        return FluxChoice(self.family, tau=value, s=self.s, beta=self.beta)


@dataclass(frozen=True)
class EdgeTrace:
    """Traces on both sides of one or more edges (fields may be arrays)."""

    u_minus: float | np.ndarray
    u_plus: float | np.ndarray
    du_minus: float | np.ndarray = 0.0
    du_plus: float | np.ndarray = 0.0
    q_minus: float | np.ndarray = 0.0
    q_plus: float | np.ndarray = 0.0


def jump(minus, plus):
    return np.subtract(minus, plus)


def mean(minus, plus):
    return 0.5 * np.add(minus, plus)


def viscous_numerical_flux(choice: FluxChoice, trace: EdgeTrace, lifting_mean=None):
    """Return ``(u_star, q_star)`` for the selected flux family.

    ``du_*`` are the physical gradients of the uncorrected solution and
    ``q_*`` the corrected gradients; only LDG reads the latter.  For BR2,
    ``lifting_mean`` is the edge average of the lifting operator.
    """
    ju = jump(trace.u_minus, trace.u_plus)
    if choice.family is FluxFamily.LDG:
        u_star = mean(trace.u_minus, trace.u_plus) - choice.beta * ju
        q_star = (
            mean(trace.q_minus, trace.q_plus)
            + choice.beta * jump(trace.q_minus, trace.q_plus)
            - choice.tau * ju
        )
        return u_star, q_star

    u_star = mean(trace.u_minus, trace.u_plus)
    grad = mean(trace.du_minus, trace.du_plus)
    if choice.family is FluxFamily.IP:
        return u_star, grad - choice.tau * ju
    if lifting_mean is None:
        raise ValueError("the BR2 flux needs the edge mean of the lifting operator")
    return u_star, grad + choice.s * lifting_mean


def _lifting_solve(basis: ReferenceBasis, j_left: float, j_right: float, u_jump: float):
    if j_left <= 0 or j_right <= 0:
        raise ValueError("Jacobians must be positive")
    n = basis.n_nodes
    mass = np.zeros((2 * n, 2 * n))
    mass[:n, :n] = j_left * basis.mass_matrix
    mass[n:, n:] = j_right * basis.mass_matrix
    # {{phi}} on the shared edge: right end of the left element, left end of the right one
    phi = 0.5 * np.concatenate([basis.interp_right, basis.interp_left])
    coeffs = lu_solve(mass, -phi * u_jump)
    return coeffs[:n], coeffs[n:]


def lifting_polynomials_numerical(basis: ReferenceBasis, j_left, j_right, u_jump):
    """Nodal values of r^e on the left and right element from the mass-matrix solve."""
    return _lifting_solve(basis, j_left, j_right, u_jump)


def lifting_mean_numerical(basis: ReferenceBasis, j_left, j_right, u_jump) -> float:
    left, right = _lifting_solve(basis, j_left, j_right, u_jump)
    return float(mean(basis.interp_right @ left, basis.interp_left @ right))


def lifting_factor_analytic(p: int, j_left, j_right):
    """f(p, J_n, J_{n+1}) = (p+1)**2 (1/J_n + 1/J_{n+1}) / 8."""
    if np.any(np.asarray(j_left) <= 0) or np.any(np.asarray(j_right) <= 0):
        raise ValueError("Jacobians must be positive")
    return (p + 1) ** 2 * (1.0 / np.asarray(j_left) + 1.0 / np.asarray(j_right)) / 8.0


def lifting_profile_analytic(basis: ReferenceBasis, j_left, j_right, u_jump, side: str):
    """r^e sampled at the nodes of the left or right element, from the DG correction functions."""
    p = basis.p
    if side == "left":
        return -0.5 * u_jump / j_left * g_right(p, 0.0, basis.nodes, 1)
    if side == "right":
        return 0.5 * u_jump / j_right * g_left(p, 0.0, basis.nodes, 1)
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def br2_penalty_from_ip(tau, p: int, j_left, j_right):
    return 8.0 * j_left * j_right * np.asarray(tau) / ((j_left + j_right) * (p + 1) ** 2)


def ip_penalty_from_br2(s, p: int, j_left, j_right):
    return np.asarray(s) * (j_left + j_right) * (p + 1) ** 2 / (8.0 * j_left * j_right)


def s_star(p: int) -> float:
    return 2.0 * stability_gap(p) / (p + 1) ** 2
