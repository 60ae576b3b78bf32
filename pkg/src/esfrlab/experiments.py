"""Model-problem experiments: blow-up aware time integration driving penalty searches and convergence studies."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from esfrlab.correction import stability_gap
from esfrlab.flux import FluxFamily, lifting_factor_analytic, s_star
from esfrlab.mesh import Mesh1D, l2_error, make_uniform_mesh
from esfrlab.solver import (
    PERIODIC,
    BoundaryCondition,
    DiffusionOperator,
    DiffusionScheme,
    SchemeParams,
    dirichlet,
    rk54_step,
    tau_star_theory,
)
from esfrlab import vonneumann

logger = logging.getLogger(__name__)

U_MAX = 2.0


class BlowUpError(ArithmeticError):
    """The discrete solution crossed the blow-up threshold."""

    def __init__(self, t: float, step: int, peak: float):
        super().__init__(f"solution blew up at t = {t:.6g} (step {step}, max|u| = {peak:.3g})")
        self.t, self.step, self.peak = t, step, peak


class BracketingError(ValueError):
    """The penalty search started from a stable value."""


@dataclass(frozen=True)
class ModelProblem:
    """u_t = b u_xx on [x_min, x_max], u(x, 0) = sin x + cos x."""

    x_min: float = 0.0
    x_max: float = 2.0 * np.pi
    b: float = 1.0
    boundary: str = "dirichlet"
    initial: str = "model"

    def exact(self, x, t: float):
        return np.exp(-self.b * t) * (np.sin(x) + np.cos(x))

    def initial_values(self, x) -> np.ndarray:
        if self.initial == "zero":
            return np.zeros_like(np.asarray(x, dtype=float))
        return self.exact(x, 0.0)

    def mesh(self, n_elements: int) -> Mesh1D:
        return make_uniform_mesh(self.x_min, self.x_max, n_elements)

    def boundary_condition(self, mesh: Mesh1D) -> BoundaryCondition:
        if self.boundary == "periodic":
            return PERIODIC
        if self.initial == "zero":
            return BoundaryCondition("dirichlet")
        return dirichlet(self.exact, mesh)


def min_node_spacing(scheme: DiffusionScheme) -> float:
    x = scheme.mesh.node_coordinates(scheme.basis.nodes)
    return float(np.min(np.diff(x, axis=1)))


def cfl_time_step(scheme: DiffusionScheme, cfl: float) -> float:
    """dt = cfl * min(dx)**2 / b with dx the smallest node spacing."""
    return cfl * min_node_spacing(scheme) ** 2 / scheme.params.diffusion_b


def resolve_penalty(params: SchemeParams, mesh: Mesh1D, multiplier: float) -> SchemeParams:
    """Set tau (or s for BR2) to ``multiplier`` times its provable threshold on ``mesh``."""
    if params.flux.family is FluxFamily.BR2:
        return params.with_penalty(multiplier * s_star(params.p))
    return params.with_penalty(multiplier * tau_star_theory(params.p, mesh))


def nondimensional_penalty(params: SchemeParams, multiplier: float) -> SchemeParams:
    """Same as :func:`resolve_penalty` for the unit-size von Neumann mesh (J = 1/2)."""
    if params.flux.family is FluxFamily.BR2:
        return params.with_penalty(multiplier * s_star(params.p))
    return params.with_penalty(multiplier * stability_gap(params.p))


@dataclass
class Trajectory:
    u: np.ndarray
    t: float
    steps: int
    dt: float
    peak: float
    samples: list = field(default_factory=list)


def integrate(operator: DiffusionOperator | Callable, u0, t_final: float, dt: float,
              u_max: float | None = U_MAX, monitor: Callable | None = None,
              every: int = 1) -> Trajectory:
    """RK54 up to ``t_final`` with the step shrunk to land on it exactly.

    Raises :class:`BlowUpError` as soon as max|u| >= u_max (checked every step).
    ``monitor(step, t, u)`` is called on the initial state and every ``every`` steps.
    """
    if t_final <= 0 or dt <= 0:
        raise ValueError("t_final and dt must be positive")
    n = int(np.ceil(t_final / dt - 1e-9))
    h = t_final / n
    u = np.array(u0, dtype=float).ravel()
    samples = []
    if monitor is not None:
        samples.append(monitor(0, 0.0, u))
    peak = float(np.max(np.abs(u)))
    for i in range(n):
        u = rk54_step(operator, u, i * h, h)
        peak = float(np.max(np.abs(u)))
        if not np.isfinite(peak) or (u_max is not None and peak >= u_max):
            raise BlowUpError((i + 1) * h, i + 1, peak)
        if monitor is not None and ((i + 1) % every == 0 or i == n - 1):
            samples.append(monitor(i + 1, (i + 1) * h, u))
    return Trajectory(u=u, t=t_final, steps=n, dt=h, peak=peak, samples=samples)


def build_scheme(params: SchemeParams, problem: ModelProblem, n_elements: int) -> DiffusionScheme:
    mesh = problem.mesh(n_elements)
    return DiffusionScheme(params, mesh, problem.boundary_condition(mesh))


def initial_state(scheme: DiffusionScheme, problem: ModelProblem) -> np.ndarray:
    return problem.initial_values(scheme.mesh.node_coordinates(scheme.basis.nodes)).ravel()


def is_stable(params: SchemeParams, problem: ModelProblem, n_elements: int, t_final: float,
              cfl: float, u_max: float = U_MAX) -> bool:
    scheme = build_scheme(params, problem, n_elements)
    try:
        integrate(scheme.assemble(), initial_state(scheme, problem), t_final,
                  cfl_time_step(scheme, cfl), u_max)
    except BlowUpError:
        return False
    return True


@dataclass(frozen=True)
class Probe:
    level: int
    penalty: float
    stable: bool


@dataclass(frozen=True)
class PenaltySearch:
    value: float
    history: tuple[Probe, ...]
    family: FluxFamily

    @property
    def n_probes(self) -> int:
        return len(self.history)


def penalty_threshold(params: SchemeParams, mesh: Mesh1D) -> float:
    if params.flux.family is FluxFamily.BR2:
        return s_star(params.p)
    return tau_star_theory(params.p, mesh)


def bracket_seed(params: SchemeParams, problem: ModelProblem, n_elements: int, start: float,
                 t_final: float = 2.0, cfl: float = 0.05, u_max: float = U_MAX,
                 max_tries: int = 40) -> float:
    """An unstable integer penalty at or below ``start``.

    Halves positive candidates, then walks down through the negatives.
    """
    pen = float(np.floor(start))
    for _ in range(max_tries):
        if not is_stable(params.with_penalty(pen), problem, n_elements, t_final, cfl, u_max):
            return pen
        pen = float(np.floor(pen / 2)) if pen > 1 else pen - max(1.0, abs(pen))
    raise BracketingError(f"no unstable penalty found below {start:g}")


def find_penalty(params: SchemeParams, problem: ModelProblem = ModelProblem(), n_elements: int = 32,
                 seed: float | None = None, levels: int = 3, first_step: float = 1.0,
                 t_final: float = 2.0, cfl: float = 0.05, u_max: float = U_MAX,
                 max_probes: int = 1000) -> PenaltySearch:
    """Smallest stable penalty (tau, or s for BR2) on a refining lattice.

    Unstable probes raise the penalty by the current step; a stable probe
    steps back once and divides the step by 10.  The result is the last
    stable probe, with precision ``first_step / 10**(levels-1)``.  Without
    a ``seed`` an unstable integer start below the provable threshold is
    found first.
    """
    if seed is None:
        start = penalty_threshold(params, problem.mesh(n_elements)) - 1.0
        seed = bracket_seed(params, problem, n_elements, start, t_final, cfl, u_max)
    step = float(first_step)
    pen = float(seed)
    history: list[Probe] = []
    best = None
    level = 0
    digits = levels + 6
    while level < levels:
        if len(history) >= max_probes:
            raise BracketingError(f"no stable penalty after {max_probes} probes")
        ok = is_stable(params.with_penalty(pen), problem, n_elements, t_final, cfl, u_max)
        history.append(Probe(level, pen, ok))
        logger.debug("probe level=%d penalty=%.6g stable=%s", level, pen, ok)
        if ok and len(history) == 1:
            raise BracketingError(f"starting penalty {seed:g} is already stable; lower it")
        if ok:
            best = pen
            pen = round(pen - step, digits)
            step /= 10.0
            level += 1
        else:
            pen = round(pen + step, digits)
    return PenaltySearch(value=float(best), history=tuple(history), family=params.flux.family)


def time_domain_dt_max(params: SchemeParams, problem: ModelProblem, n_elements: int,
                       dt_guess: float, t_final: float = 1.0, rtol: float = 1e-3,
                       u_max: float = U_MAX) -> float:
    """Largest dt keeping max|u| < u_max up to ``t_final``, by bracketing around ``dt_guess``."""
    scheme = build_scheme(params, problem, n_elements)
    op = scheme.assemble()
    u0 = initial_state(scheme, problem)

    def bounded(dt):
        try:
            integrate(op, u0, t_final, dt, u_max)
        except BlowUpError:
            return False
        return True

    if bounded(dt_guess):
        lo, hi = dt_guess, 1.25 * dt_guess
        while bounded(hi):
            lo, hi = hi, 1.25 * hi
            if hi > 100 * dt_guess:
                raise ArithmeticError("no unstable time step found")
    else:
        lo, hi = 0.8 * dt_guess, dt_guess
        while not bounded(lo):
            lo, hi = 0.8 * lo, lo
            if lo < 1e-6 * dt_guess:
                raise ArithmeticError("no stable time step found")
    while hi - lo > rtol * lo:
        mid = 0.5 * (lo + hi)
        if bounded(mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class ConvergenceRow:
    n_elements: int
    l2_error: float
    ooa: float | None
    dt: float
    steps: int


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple[ConvergenceRow, ...]
    dt_vn: float | None
    penalty_multiplier: float

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.l2_error for r in self.rows])

    @property
    def orders(self) -> list[float]:
        return [r.ooa for r in self.rows[1:]]


def order_of_accuracy(coarse: float, fine: float, ratio: float = 2.0) -> float:
    return float(np.log(coarse / fine) / np.log(ratio))


def convergence_study(params: SchemeParams, problem: ModelProblem = ModelProblem(),
                      meshes: Sequence[int] = (32, 64, 128), penalty_multiplier: float = 1.0,
                      t_final: float = 1.0, dt_policy: str = "vn_max", dt: float | None = None,
                      cfl: float = 0.05, dt_safety: float = 0.99, k_points: int = 629,
                      n_quad: int | None = None) -> ConvergenceReport:
    """L2 errors and pairwise orders over successively refined uniform meshes.

    ``dt_policy``: ``vn_max`` scales the nondimensional von Neumann limit by
    h**2 / b on every mesh, ``cfl`` uses :func:`cfl_time_step`, ``fixed``
    uses ``dt`` on every mesh.
    """
    dt_vn = None
    if dt_policy == "vn_max":
        dt_vn = vonneumann.dt_max(nondimensional_penalty(params, penalty_multiplier), k_points)
    rows = []
    prev = None
    for nk in meshes:
        mesh = problem.mesh(nk)
        scheme = DiffusionScheme(resolve_penalty(params, mesh, penalty_multiplier), mesh,
                                 problem.boundary_condition(mesh))
        if dt_policy == "vn_max":
            step = dt_safety * dt_vn * float(np.max(mesh.sizes)) ** 2 / params.diffusion_b
        elif dt_policy == "cfl":
            step = cfl_time_step(scheme, cfl)
        elif dt_policy == "fixed":
            if dt is None:
                raise ValueError("dt_policy 'fixed' needs dt")
            step = dt
        else:
            raise ValueError(f"unknown dt policy {dt_policy!r}")
        traj = integrate(scheme.assemble(), initial_state(scheme, problem), t_final, step, u_max=None)
        if not np.all(np.isfinite(traj.u)):
            raise BlowUpError(t_final, traj.steps, float("inf"))
        err = l2_error(mesh, scheme.basis, traj.u, problem.exact, t_final, n_quad)
        ooa = None if prev is None else order_of_accuracy(prev[1], err, nk / prev[0])
        rows.append(ConvergenceRow(nk, err, ooa, traj.dt, traj.steps))
        prev = (nk, err)
    return ConvergenceReport(tuple(rows), dt_vn, penalty_multiplier)


def br2_from_ip_threshold(p: int, mesh: Mesh1D) -> float:
    """s equivalent to tau*_theory on a uniform mesh (equals p/(p+1))."""
    j = float(mesh.jacobians[0])
    return tau_star_theory(p, mesh) / float(lifting_factor_analytic(p, j, j))
