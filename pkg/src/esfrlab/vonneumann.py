"""Bloch-wave (von Neumann) analysis of the periodic, nondimensional scheme.

The nondimensional setting uses unit element size (J = 1/2) and b = 1, so
physical time steps follow from ``dt_phys = dt_vn * h**2 / b``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from esfrlab.linalg import EigenDecomposition, eig
from esfrlab.mesh import ReferenceBasis, make_uniform_mesh
from esfrlab.solver import (
    PERIODIC,
    RK54_AMPLIFICATION,
    DiffusionOperator,
    DiffusionScheme,
    SchemeParams,
    rk54_amplification_from_stages,
)

DEFAULT_K_POINTS = 629
# a small periodic mesh is enough: every row sees the same three blocks
_VN_ELEMENTS = 4
_TIE_TOL = 1e-12
_STABLE_TOL = 1e-12


@dataclass(frozen=True)
class BlochMatrix:
    k: float
    matrix: np.ndarray


def nondimensional_scheme(params: SchemeParams, n_elements: int = _VN_ELEMENTS) -> DiffusionScheme:
    """Periodic scheme with h = 1 and b = 1 (penalties are used as given)."""
    mesh = make_uniform_mesh(0.0, float(n_elements), n_elements)
    return DiffusionScheme(replace(params, diffusion_b=1.0), mesh, PERIODIC)


def nondimensional_operator(params: SchemeParams, n_elements: int = _VN_ELEMENTS) -> DiffusionOperator:
    return nondimensional_scheme(params, n_elements).assemble()


def bloch_matrix(operator: DiffusionOperator, k: float) -> BlochMatrix:
    if not operator.bc.periodic or operator.n_elements < 3:
        raise ValueError("Bloch analysis needs a periodic operator with at least 3 elements")
    cm, c0, cp = operator.block_row(1)
    return BlochMatrix(float(k), cm * np.exp(-1j * k) + c0 + cp * np.exp(1j * k))


def modal_coefficients(eigenvectors: np.ndarray, basis: ReferenceBasis) -> np.ndarray:
    """Legendre coefficients of each (nodal) eigenvector; column j is eigenvector j."""
    return basis.inv_vandermonde @ eigenvectors


def sort_modes(vbar: np.ndarray) -> np.ndarray:
    """Greedy mode assignment: ``assignment[i]`` is the eigenvector column of mode i+1.

    Mode 1 takes the column with the largest |vbar[0, j]|; that column is
    removed and mode 2 picks among the rest, and so on.  Near-ties go to the
    smaller column index.
    """
    mag = np.abs(np.asarray(vbar))
    n = mag.shape[0]
    free = list(range(mag.shape[1]))
    out = np.empty(n, dtype=int)
    for i in range(n):
        row = mag[i, free]
        best = row.max()
        pick = next(j for j, v in zip(free, row) if v >= best - _TIE_TOL * max(best, 1.0))
        out[i] = pick
        free.remove(pick)
    return out


def coupling_ratios(vbar: np.ndarray, assignment) -> tuple[np.ndarray, np.ndarray]:
    """(R_mode, R_energy) for every mode.

    R_mode normalizes |vbar_ij|^2 by its eigenvector column, R_energy by the
    mode's row across all eigenvectors.
    """
    sq = np.abs(np.asarray(vbar)) ** 2
    rows = np.arange(sq.shape[0])
    cols = np.asarray(assignment)
    picked = sq[rows, cols]
    return picked / sq[:, cols].sum(axis=0), picked / sq.sum(axis=1)


def extended_wavenumber(mode: int, k) -> np.ndarray:
    """Map k in [-pi, pi] of mode ``mode`` (1-based) onto [(m-1) pi, m pi]."""
    k = np.abs(np.asarray(k, dtype=float))
    if mode % 2:
        return (mode - 1) * np.pi + k
    return mode * np.pi - k


@dataclass(frozen=True)
class SpectralScan:
    k_grid: np.ndarray
    eigenvalues: np.ndarray  # (p+1, N_k), row i is mode i+1
    mode_of: np.ndarray  # (p+1, N_k) eigenvector column chosen for each mode
    r_mode: np.ndarray
    r_energy: np.ndarray
    extended_k: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.shape[0]

    def curve(self, k_min: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        """Re(lambda) along the extended wavenumber, sorted, for k >= k_min."""
        keep = self.k_grid >= k_min
        kt = self.extended_k[:, keep].ravel()
        re = self.eigenvalues[:, keep].real.ravel()
        order = np.argsort(kt, kind="stable")
        return kt[order], re[order]


def decompose(operator: DiffusionOperator, basis: ReferenceBasis, k: float):
    """Eigen-decompose S(k) and sort its modes; returns (eigenvalues, assignment, R_mode, R_energy)."""
    dec: EigenDecomposition = eig(bloch_matrix(operator, k).matrix)
    vbar = modal_coefficients(dec.eigenvectors, basis)
    assign = sort_modes(vbar)
    r_mode, r_energy = coupling_ratios(vbar, assign)
    return dec.eigenvalues[assign], assign, r_mode, r_energy


def k_grid(n_points: int = DEFAULT_K_POINTS) -> np.ndarray:
    if n_points < 3:
        raise ValueError("need at least 3 wavenumbers")
    return np.linspace(-np.pi, np.pi, n_points)


def dissipation_curve(params: SchemeParams, k_points: int = DEFAULT_K_POINTS) -> SpectralScan:
    scheme = nondimensional_scheme(params)
    op = scheme.assemble()
    ks = k_grid(k_points)
    n = params.p + 1
    lam = np.empty((n, ks.size), dtype=complex)
    mode_of = np.empty((n, ks.size), dtype=int)
    r_mode = np.empty((n, ks.size))
    r_energy = np.empty((n, ks.size))
    for j, k in enumerate(ks):
        try:
            lam[:, j], mode_of[:, j], r_mode[:, j], r_energy[:, j] = decompose(op, scheme.basis, k)
        except np.linalg.LinAlgError as exc:
            raise type(exc)(f"eigensolver failed at k = {k:.6g}: {exc}") from exc
    ext = np.vstack([extended_wavenumber(m + 1, ks) for m in range(n)])
    return SpectralScan(ks, lam, mode_of, r_mode, r_energy, ext)


def jump_locations(scan: SpectralScan, rel_threshold: float = 0.05) -> np.ndarray:
    """Extended wavenumbers where the sorted dissipation curve jumps.

    A jump is a step in Re(lambda) between neighbouring k-tilde samples
    larger than ``rel_threshold`` times the curve's range.
    """
    kt, re = scan.curve(k_min=0.0)
    if kt.size < 2:
        return np.empty(0)
    step = np.abs(np.diff(re))
    big = step > rel_threshold * (re.max() - re.min())
    return 0.5 * (kt[1:] + kt[:-1])[big]


def spectral_radius(eigenvalues, dt: float) -> float:
    """Spectral radius of the RK54 amplification matrix P(dt S).

    The eigenvalues of a polynomial in S are the polynomial of its
    eigenvalues, so no matrix power is formed.
    """
    z = dt * np.asarray(eigenvalues)
    return float(np.max(np.abs(np.polyval(RK54_AMPLIFICATION[::-1], z))))


def check_amplification(z: complex = -1.3 + 0.4j) -> float:
    """Discrepancy between the tabulated polynomial and the time stepper."""
    poly = complex(np.polyval(RK54_AMPLIFICATION[::-1], z))
    return abs(poly - rk54_amplification_from_stages(z))


def operator_eigenvalues(params: SchemeParams, k_points: int = DEFAULT_K_POINTS) -> np.ndarray:
    scheme = nondimensional_scheme(params)
    op = scheme.assemble()
    return np.concatenate([eig(bloch_matrix(op, k).matrix).eigenvalues for k in k_grid(k_points)])


def dt_max(params: SchemeParams, k_points: int = DEFAULT_K_POINTS, dt_seed: float = 1.0,
           tolerance: float = 1e-4) -> float:
    """Largest RK54 time step with spectral radius <= 1 over the k grid.

    ``dt_seed`` must be unstable; it is halved until stable and the bracket
    is then bisected to relative ``tolerance``.
    """
    if check_amplification() > 1e-12:
        raise ArithmeticError("RK54 amplification polynomial disagrees with the time stepper")
    lam = operator_eigenvalues(params, k_points)

    def stable(dt):
        return spectral_radius(lam, dt) <= 1.0 + _STABLE_TOL

    hi = float(dt_seed)
    if hi <= 0:
        raise ValueError("dt_seed must be positive")
    if stable(hi):
        raise ValueError(f"dt_seed = {hi:g} is already stable; raise it")
    lo = 0.5 * hi
    while not stable(lo):
        hi, lo = lo, 0.5 * lo
        if lo < 1e-14:
            raise ArithmeticError("no stable time step found")
    while hi - lo > tolerance * lo:
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return lo
