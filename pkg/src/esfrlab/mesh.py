"""1D meshes and the Lagrange basis operators on each node family."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from esfrlab.legendre import legendre_table, vandermonde
from esfrlab.linalg import inv


class NodeFamily(str, Enum):
    LGL = "lgl"
    GL = "gl"
    EQUIDISTANT = "equi"

    @classmethod
    def parse(cls, value) -> "NodeFamily":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"equidistant": "equi", "lobatto": "lgl", "gauss": "gl"}
        return cls(aliases.get(key, key))


class RootFindingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Mesh1D:
    boundaries: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        if b.ndim != 1 or b.size < 3:
            raise ValueError("a mesh needs at least two elements")
        if np.any(np.diff(b) <= 0):
            raise ValueError("element boundaries must be strictly increasing")
        object.__setattr__(self, "boundaries", b)

    @property
    def n_elements(self) -> int:
        return self.boundaries.size - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.boundaries)

    @property
    def jacobians(self) -> np.ndarray:
        return 0.5 * self.sizes

    @property
    def length(self) -> float:
        return float(self.boundaries[-1] - self.boundaries[0])

    @property
    def is_uniform(self) -> bool:
        h = self.sizes
        return bool(np.allclose(h, h[0], rtol=1e-12, atol=0.0))

    def node_coordinates(self, nodes) -> np.ndarray:
        """Physical coordinates of reference ``nodes`` in every element, shape (N_K, len(nodes))."""
        r = np.asarray(nodes, dtype=float)
        xl, xr = self.boundaries[:-1, None], self.boundaries[1:, None]
        return 0.5 * (1 - r) * xl + 0.5 * (1 + r) * xr


def make_uniform_mesh(x_min: float, x_max: float, n_elements: int) -> Mesh1D:
    if not x_max > x_min:
        raise ValueError(f"invalid bounds [{x_min}, {x_max}]")
    if n_elements < 2:
        raise ValueError(f"need at least 2 elements, got {n_elements}")
    return Mesh1D(np.linspace(x_min, x_max, n_elements + 1))


def _newton(f, x0, maxiter=100, tol=1e-15):
    x = np.array(x0, dtype=float)
    for _ in range(maxiter):
        val, der = f(x)
        dx = val / der
        x = x - dx
        if np.max(np.abs(dx)) <= tol:
            return x
    val, _ = f(x)
    if np.max(np.abs(val)) > 1e-12:
        raise RootFindingError("Newton iteration for quadrature nodes did not converge")
    return x


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule."""
    if n < 1:
        raise ValueError("need at least one point")
    return np.polynomial.legendre.leggauss(n)


def gauss_lobatto(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Lobatto-Gauss-Legendre rule (n >= 2)."""
    if n < 2:
        raise ValueError("LGL needs at least two points")
    p = n - 1
    x = np.empty(n)
    x[0], x[-1] = -1.0, 1.0
    if p >= 2:
        guess = -np.cos(np.pi * np.arange(1, p) / p)

        def f(r):
            tab = legendre_table(p, r, 2)
            return tab[1, p], tab[2, p]

        x[1:-1] = np.sort(_newton(f, guess))
    psi = legendre_table(p, x, 0)[0, p]
    return x, 2.0 / (p * (p + 1) * psi**2)


def reference_nodes(p: int, family) -> np.ndarray:
    family = NodeFamily.parse(family)
    if family is NodeFamily.LGL:
        return gauss_lobatto(p + 1)[0]
    if family is NodeFamily.GL:
        return gauss_legendre(p + 1)[0]
    return np.linspace(-1.0, 1.0, p + 1)


@dataclass(frozen=True)
class ReferenceBasis:
    p: int
    node_family: NodeFamily
    nodes: np.ndarray
    diff_matrix: np.ndarray
    interp_left: np.ndarray
    interp_right: np.ndarray
    mass_matrix: np.ndarray
    quad_weights: np.ndarray
    inv_vandermonde: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.p + 1

    def interpolation_matrix(self, r) -> np.ndarray:
        """Rows evaluating a nodal polynomial at the points ``r``."""
        return vandermonde(self.p, np.atleast_1d(r)) @ self.inv_vandermonde


def make_reference_basis(p: int, node_family="lgl") -> ReferenceBasis:
    if p < 1:
        raise ValueError("basis degree must be >= 1")
    family = NodeFamily.parse(node_family)
    nodes = reference_nodes(p, family)
    vinv = inv(vandermonde(p, nodes))
    dtab = legendre_table(p, nodes, 1)[1].T
    ends = vandermonde(p, [-1.0, 1.0]) @ vinv

    # exact mass matrix: p+1 Gauss points integrate degree 2p+1
    xq, wq = gauss_legendre(p + 1)
    lq = vandermonde(p, xq) @ vinv
    mass = lq.T @ (wq[:, None] * lq)
    mass = 0.5 * (mass + mass.T)

    if family is NodeFamily.LGL:
        weights = gauss_lobatto(p + 1)[1]
    elif family is NodeFamily.GL:
        weights = gauss_legendre(p + 1)[1]
    else:
        weights = mass.sum(axis=1)

    return ReferenceBasis(
        p=p,
        node_family=family,
        nodes=nodes,
        diff_matrix=dtab @ vinv,
        interp_left=ends[0],
        interp_right=ends[1],
        mass_matrix=mass,
        quad_weights=weights,
        inv_vandermonde=vinv,
    )


def l2_error(mesh: Mesh1D, basis: ReferenceBasis, nodal_solution, exact_fn, t: float,
             n_quad: int | None = None) -> float:
    """Broken L2 error with an ``n_quad``-point LGL rule on each element.

    The default ``n_quad = p + 3`` integrates the squared error of the
    polynomial part exactly and resolves the interpolation error of
    ``exact_fn(x, t)``.  With ``n_quad = p + 1`` on LGL nodes this reduces
    to the nodal quadrature, which is blind to that interpolation error.
    """
    u = np.asarray(nodal_solution, dtype=float)
    if u.size != mesh.n_elements * basis.n_nodes:
        raise ValueError(
            f"solution has {u.size} entries, expected {mesh.n_elements * basis.n_nodes}"
        )
    n_quad = basis.p + 3 if n_quad is None else int(n_quad)
    u = u.reshape(mesh.n_elements, basis.n_nodes)
    rq, wq = gauss_lobatto(n_quad)
    if basis.node_family is not NodeFamily.LGL or n_quad != basis.n_nodes:
        u = u @ basis.interpolation_matrix(rq).T
    xq = mesh.node_coordinates(rq)
    diff = u - exact_fn(xq, t)
    return float(np.sqrt(np.sum(mesh.jacobians[:, None] * wq * diff**2)))
