"""Semi-discrete ESFR diffusion operator with RK54 time stepping and energy monitoring."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from math import factorial
from typing import Callable

import numpy as np

from esfrlab.correction import CorrectionSet, EsfrParam, make_correction_set, make_param, stability_gap
from esfrlab.flux import EdgeTrace, FluxChoice, FluxFamily, lifting_factor_analytic, viscous_numerical_flux
from esfrlab.legendre import leading_coefficient
from esfrlab.mesh import Mesh1D, NodeFamily, ReferenceBasis, make_reference_basis

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SchemeParams:
    p: int
    c: EsfrParam
    kappa: EsfrParam
    flux: FluxChoice
    node_family: NodeFamily = NodeFamily.LGL
    diffusion_b: float = 1.0

    def __post_init__(self):
        if self.diffusion_b <= 0:
            raise ValueError("the diffusion coefficient must be positive")

    @classmethod
    def build(cls, p, c="DG", kappa="DG", flux="ip", tau=0.0, s=0.0, beta=0.5,
              nodes="lgl", b=1.0) -> "SchemeParams":
        return cls(
            p=p,
            c=make_param(c, p),
            kappa=make_param(kappa, p),
            flux=FluxChoice(FluxFamily.parse(flux), tau=tau, s=s, beta=beta),
            node_family=NodeFamily.parse(nodes),
            diffusion_b=b,
        )

    def with_penalty(self, value) -> "SchemeParams":
        return replace(self, flux=self.flux.with_penalty(value))

    def with_kappa(self, kappa) -> "SchemeParams":
        return replace(self, kappa=make_param(kappa, self.p))


@dataclass(frozen=True)
class BoundaryCondition:
    """``periodic`` or ``dirichlet`` with boundary data ``left(t)``/``right(t)``.

    Dirichlet data enter through mirror ghost traces, u_ghost = 2 g - u and
    grad u_ghost = grad u, so the interior flux formulas apply unchanged.
    """

    kind: str = "periodic"
    left: Callable[[float], float] | None = None
    right: Callable[[float], float] | None = None

    def __post_init__(self):
        if self.kind not in ("periodic", "dirichlet"):
            raise ValueError(f"unknown boundary condition {self.kind!r}")

    @property
    def periodic(self) -> bool:
        return self.kind == "periodic"

    def values(self, t: float) -> tuple[float, float]:
        gl = self.left(t) if self.left is not None else 0.0
        gr = self.right(t) if self.right is not None else 0.0
        return float(gl), float(gr)


PERIODIC = BoundaryCondition("periodic")


def dirichlet(exact: Callable[[np.ndarray, float], np.ndarray], mesh: Mesh1D) -> BoundaryCondition:
    """Dirichlet data taken from ``exact(x, t)`` at the domain ends."""
    x0, x1 = mesh.boundaries[0], mesh.boundaries[-1]
    return BoundaryCondition(
        "dirichlet",
        left=lambda t: float(exact(np.array(x0), t)),
        right=lambda t: float(exact(np.array(x1), t)),
    )


@dataclass(frozen=True)
class EnergyReport:
    u_norm_sq: float
    q_norm_sq: float
    theta_sum: float
    energy_rate: float


@dataclass
class _Traces:
    u_star: np.ndarray
    q_star: np.ndarray
    q: np.ndarray
    edge: EdgeTrace


class DiffusionScheme:
    """A discretization: scheme parameters on a mesh, with a boundary policy."""

    def __init__(self, params: SchemeParams, mesh: Mesh1D, bc: BoundaryCondition = PERIODIC,
                 basis: ReferenceBasis | None = None):
        self.params = params
        self.mesh = mesh
        self.bc = bc
        self.basis = basis if basis is not None else make_reference_basis(params.p, params.node_family)
        if self.basis.p != params.p:
            raise ValueError("basis degree does not match the scheme")
        self.corr: CorrectionSet = make_correction_set(params.p, params.c, params.kappa, self.basis.nodes)
        self.jac = mesh.jacobians
        self.n_edges = mesh.n_elements + (0 if bc.periodic else 1)
        self.edge_penalty = self._edge_penalty()

    @property
    def shape(self) -> tuple[int, int]:
        return self.mesh.n_elements, self.basis.n_nodes

    @property
    def size(self) -> int:
        return self.mesh.n_elements * self.basis.n_nodes

    def _edge_jacobians(self) -> tuple[np.ndarray, np.ndarray]:
        j = self.jac
        if self.bc.periodic:
            return np.roll(j, 1), j
        # boundary edges see the adjacent element on both sides
        jl = np.concatenate([j[:1], j])
        jr = np.concatenate([j, j[-1:]])
        return jl, jr

    def _edge_penalty(self) -> np.ndarray:
        """Per-edge coefficient of -[[u]] in q* for IP/BR2 (and LDG)."""
        flux = self.params.flux
        pen = np.broadcast_to(np.asarray(flux.penalty, dtype=float), (self.n_edges,)).copy()
        if flux.family is FluxFamily.BR2:
            jl, jr = self._edge_jacobians()
            pen = pen * lifting_factor_analytic(self.params.p, jl, jr)
        return pen

    def _edge_values(self, left_vals, right_vals, ghost_left, ghost_right):
        """Assemble minus/plus edge arrays from element end values."""
        if self.bc.periodic:
            return np.roll(right_vals, 1), left_vals
        minus = np.concatenate([[ghost_left], right_vals])
        plus = np.concatenate([left_vals, [ghost_right]])
        return minus, plus

    def _traces(self, u: np.ndarray, t: float, bc_scale: float = 1.0) -> _Traces:
        b = self.basis
        corr = self.corr
        jac = self.jac[:, None]
        fam = self.params.flux.family

        du_r = u @ b.diff_matrix.T
        uL, uR = u @ b.interp_left, u @ b.interp_right
        gradL = (du_r @ b.interp_left) / self.jac
        gradR = (du_r @ b.interp_right) / self.jac

        gl, gr = self.bc.values(t) if not self.bc.periodic else (0.0, 0.0)
        gl, gr = bc_scale * gl, bc_scale * gr
        u_m, u_p = self._edge_values(uL, uR, 2 * gl - uL[0], 2 * gr - uR[-1])
        du_m, du_p = self._edge_values(gradL, gradR, gradL[0], gradR[-1])
        edge = EdgeTrace(u_m, u_p, du_m, du_p)

        u_star, _ = viscous_numerical_flux(
            FluxChoice(FluxFamily.IP if fam is FluxFamily.BR2 else fam, beta=self.params.flux.beta),
            edge,
        )
        us_left, us_right = self._element_sides(u_star)
        q = (du_r + (us_left - uL)[:, None] * corr.dgl_at_nodes
             + (us_right - uR)[:, None] * corr.dgr_at_nodes) / jac

        if fam is FluxFamily.LDG:
            qL, qR = q @ b.interp_left, q @ b.interp_right
            q_m, q_p = self._edge_values(qL, qR, qL[0], qR[-1])
            edge = EdgeTrace(u_m, u_p, du_m, du_p, q_m, q_p)
            _, q_star = viscous_numerical_flux(
                FluxChoice(FluxFamily.LDG, tau=self.edge_penalty, beta=self.params.flux.beta), edge
            )
        else:
            _, q_star = viscous_numerical_flux(FluxChoice(FluxFamily.IP, tau=self.edge_penalty), edge)
        return _Traces(u_star=u_star, q_star=q_star, q=q, edge=edge)

    def _element_sides(self, edge_vals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Edge values seen from the left (r=-1) and right (r=1) end of each element."""
        if self.bc.periodic:
            return edge_vals, np.roll(edge_vals, -1)
        return edge_vals[:-1], edge_vals[1:]

    def evaluate_rhs(self, u, t: float = 0.0, bc_scale: float = 1.0) -> np.ndarray:
        """du/dt at the solution nodes; ``u`` is flat or shaped (N_K, p+1)."""
        u = np.asarray(u, dtype=float)
        flat = u.ndim == 1
        u = u.reshape(self.shape)
        b = self.basis
        corr = self.corr
        tr = self._traces(u, t, bc_scale)
        q = tr.q
        qL, qR = q @ b.interp_left, q @ b.interp_right
        qs_left, qs_right = self._element_sides(tr.q_star)
        dq = (q @ b.diff_matrix.T + (qs_left - qL)[:, None] * corr.dhl_at_nodes
              + (qs_right - qR)[:, None] * corr.dhr_at_nodes)
        out = self.params.diffusion_b * dq / self.jac[:, None]
        return out.ravel() if flat else out

    def auxiliary(self, u, t: float = 0.0) -> np.ndarray:
        """Corrected gradient q at the solution nodes."""
        u = np.asarray(u, dtype=float).reshape(self.shape)
        return self._traces(u, t).q

    def assemble(self) -> "DiffusionOperator":
        n = self.size
        matrix = np.empty((n, n))
        eye = np.eye(n)
        for j in range(n):
            matrix[:, j] = self.evaluate_rhs(eye[j], 0.0, bc_scale=0.0)
        zero = np.zeros(n)
        if self.bc.periodic:
            inj_l = inj_r = zero
        else:
            saved = self.bc
            try:
                self.bc = BoundaryCondition("dirichlet", left=lambda t: 1.0, right=lambda t: 0.0)
                inj_l = self.evaluate_rhs(zero, 0.0)
                self.bc = BoundaryCondition("dirichlet", left=lambda t: 0.0, right=lambda t: 1.0)
                inj_r = self.evaluate_rhs(zero, 0.0)
            finally:
                self.bc = saved
        return DiffusionOperator(matrix=matrix, n_elements=self.mesh.n_elements,
                                 n_nodes=self.basis.n_nodes, inject_left=inj_l, inject_right=inj_r,
                                 bc=self.bc)

    def energy_report(self, u, t: float = 0.0) -> EnergyReport:
        """Broken energy norms, the edge terms Theta_e and d/dt ||U||^2 / 2."""
        p = self.params.p
        u = np.asarray(u, dtype=float).reshape(self.shape)
        tr = self._traces(u, t)
        dudt = self.evaluate_rhs(u, t)
        c = self.params.c.value
        k = self.params.kappa.value
        u_sq = self.broken_norm_sq(u, c)
        q_sq = self.broken_norm_sq(tr.q, k)
        rate = self.broken_inner(u, dudt, c)

        b = self.basis
        qL, qR = tr.q @ b.interp_left, tr.q @ b.interp_right
        q_m, q_p = self._edge_values(qL, qR, qL[0], qR[-1])
        e = tr.edge
        theta = (e.u_plus * q_p - e.u_minus * q_m) - tr.q_star * (e.u_plus - e.u_minus) \
            - tr.u_star * (q_p - q_m)
        return EnergyReport(u_norm_sq=u_sq, q_norm_sq=q_sq, theta_sum=float(np.sum(theta)),
                            energy_rate=rate)

    def _top_mode_scale(self):
        p = self.params.p
        vinv_row = self.basis.inv_vandermonde[p]
        return vinv_row * leading_coefficient(p) * factorial(p)

    def broken_inner(self, u, v, c: float) -> float:
        """sum_n J_n [u^T M v + c (d^p_r u)(d^p_r v)] with exact mass matrices."""
        u = np.asarray(u).reshape(self.shape)
        v = np.asarray(v).reshape(self.shape)
        m = self.basis.mass_matrix
        base = np.einsum("ni,ij,nj->n", u, m, v)
        top = self._top_mode_scale()
        extra = c * (u @ top) * (v @ top)
        return float(np.sum(self.jac * (base + extra)))

    def broken_norm_sq(self, u, c: float) -> float:
        return self.broken_inner(u, u, c)


@dataclass(frozen=True)
class DiffusionOperator:
    """Assembled linear operator du/dt = A u + g_L(t) a_L + g_R(t) a_R."""

    matrix: np.ndarray
    n_elements: int
    n_nodes: int
    inject_left: np.ndarray
    inject_right: np.ndarray
    bc: BoundaryCondition = field(default=PERIODIC, compare=False)

    def block(self, row: int, col: int) -> np.ndarray:
        m = self.n_nodes
        return self.matrix[row * m:(row + 1) * m, col * m:(col + 1) * m]

    def block_row(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(C_{n-1}, C_n, C_{n+1}) for element ``n`` (wrapping for periodic meshes)."""
        nk = self.n_elements
        return self.block(n, (n - 1) % nk), self.block(n, n), self.block(n, (n + 1) % nk)

    @property
    def C_minus(self):
        return self.block_row(1)[0]

    @property
    def C_zero(self):
        return self.block_row(1)[1]

    @property
    def C_plus(self):
        return self.block_row(1)[2]

    def rhs(self, u, t: float) -> np.ndarray:
        out = self.matrix @ u
        if not self.bc.periodic:
            gl, gr = self.bc.values(t)
            out = out + gl * self.inject_left + gr * self.inject_right
        return out

    __call__ = rhs


# Carpenter & Kennedy five-stage fourth-order 2N-storage Runge-Kutta
RK54_A = np.array([
    0.0,
    -567301805773.0 / 1357537059087.0,
    -2404267990393.0 / 2016746695238.0,
    -3550918686646.0 / 2091501179385.0,
    -1275806237668.0 / 842570457699.0,
])
RK54_B = np.array([
    1432997174477.0 / 9575080441755.0,
    5161836677717.0 / 13612068292357.0,
    1720146321549.0 / 2090206949498.0,
    3134564353537.0 / 4481467310338.0,
    2277821191437.0 / 14882151754819.0,
])
RK54_C = np.array([
    0.0,
    1432997174477.0 / 9575080441755.0,
    2526269341429.0 / 6820363962896.0,
    2006345519317.0 / 3224310063776.0,
    2802321613138.0 / 2924317926251.0,
])
# coefficients of z**0..z**5 in the RK54 amplification polynomial
RK54_AMPLIFICATION = np.array([1.0, 1.0, 1.0 / 2, 1.0 / 6, 1.0 / 24, 1.0 / 200])


def rk54_step(rhs: Callable[[np.ndarray, float], np.ndarray], u, t: float, dt: float) -> np.ndarray:
    if dt <= 0:
        raise ValueError("time step must be positive")
    u = np.array(u, dtype=np.result_type(u, float), copy=True)
    k = np.zeros_like(u)
    for a, b, c in zip(RK54_A, RK54_B, RK54_C):
        k = a * k + dt * rhs(u, t + c * dt)
        u = u + b * k
    return u


def rk54_amplification(z):
    """Scalar/matrix-free amplification factor 1 + z + ... + z^5/200."""
    z = np.asarray(z)
    return np.polyval(RK54_AMPLIFICATION[::-1], z)


def rk54_amplification_from_stages(z) -> complex:
    """Amplification factor obtained by running the low-storage stages on u' = z u."""
    return complex(rk54_step(lambda u, t: z * u, np.array([1.0 + 0j]), 0.0, 1.0)[0])


def tau_star_theory(p: int, mesh: Mesh1D) -> float:
    return stability_gap(p) / (2.0 * float(np.min(mesh.jacobians)))


def tau_star_per_edge(p: int, mesh: Mesh1D, periodic: bool = False) -> np.ndarray:
    """Per-edge threshold gap * (1/J_- + 1/J_+) / 4.

    Boundary edges (non-periodic) use the adjacent element on both sides.
    """
    j = mesh.jacobians
    if periodic:
        jl, jr = np.roll(j, 1), j
    else:
        jl = np.concatenate([j[:1], j])
        jr = np.concatenate([j, j[-1:]])
    return 0.25 * (1.0 / jl + 1.0 / jr) * stability_gap(p)
