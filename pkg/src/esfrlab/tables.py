"""Reference tables for the model problem and the runners that recompute them.

Each runner returns :class:`TableCell` records (expected vs computed with a
per-table tolerance); cells are dispatched to a worker pool and reassembled
in key order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from math import pi
from typing import Callable, Sequence

import numpy as np

from esfrlab.experiments import (
    ModelProblem,
    convergence_study,
    find_penalty,
    nondimensional_penalty,
)
from esfrlab.flux import lifting_factor_analytic, lifting_mean_numerical, s_star
from esfrlab.mesh import NodeFamily, make_reference_basis, make_uniform_mesh
from esfrlab.solver import DiffusionScheme, SchemeParams, tau_star_theory
from esfrlab import vonneumann

C_ROWS = ("DG", "SD", "HU", "PLUS", "1e5")
KAPPA_COLS = ("DG", "SD", "HU", "PLUS", "1e5")

# smallest stable IP penalty, 32 elements on [0, 2 pi]; rows are c
_T2_ROWS = {
    2: {"DG": 15.21, "SD": 15.18, "HU": 15.12, "PLUS": 14.97, "1e5": 5.02},
    3: {"DG": 30.49, "SD": 30.46, "HU": 30.43, "PLUS": 30.35, "1e5": 15.21},
}
_T2_THEORY = {2: 15.28, 3: 30.56}
# the published grid has one cell that breaks its row
_T2_CELL_OVERRIDES = {(2, "PLUS", "HU"): 14.68}

# BR2 lifting factor f for N_K = 16 on [0, 2 pi]
T3 = {1: 5.093, 2: 11.46, 3: 20.37, 4: 31.83, 5: 45.84, 6: 62.39, 7: 81.49, 8: 103.1}

_T4_ROWS = {
    2: {"DG": 0.67, "SD": 0.67, "HU": 0.66, "PLUS": 0.65, "1e5": 0.23},
    3: {"DG": 0.75, "SD": 0.75, "HU": 0.75, "PLUS": 0.75, "1e5": 0.38},
}
_T4_THEORY = {2: 0.67, 3: 0.75}

# RK54 maximal nondimensional time step, IP flux; key (p, c, tau multiplier)
T5 = {
    (2, "DG", 1.0): 7.761e-02, (2, "DG", 1.1): 7.761e-02, (2, "DG", 1.5): 7.761e-02,
    (2, "SD", 1.0): 1.293e-01, (2, "SD", 1.1): 1.293e-01, (2, "SD", 1.5): 1.109e-01,
    (2, "HU", 1.0): 1.816e-01, (2, "HU", 1.1): 1.680e-01, (2, "HU", 1.5): 1.109e-01,
    (2, "PLUS", 1.0): 1.940e-01, (2, "PLUS", 1.1): 1.687e-01, (2, "PLUS", 1.5): 1.109e-01,
    (3, "DG", 1.0): 2.737e-02, (3, "DG", 1.1): 2.737e-02, (3, "DG", 1.5): 2.737e-02,
    (3, "SD", 1.0): 4.740e-02, (3, "SD", 1.1): 4.740e-02, (3, "SD", 1.5): 3.186e-02,
    (3, "HU", 1.0): 5.616e-02, (3, "HU", 1.1): 5.150e-02, (3, "HU", 1.5): 3.186e-02,
    (3, "PLUS", 1.0): 5.993e-02, (3, "PLUS", 1.1): 5.246e-02, (3, "PLUS", 1.5): 3.186e-02,
}

# L2 errors on 32/64/128 elements, OOA 32/64 and 64/128, dimensional dt at 32 elements
T6_T7 = {
    (2, "DG", 1.0): (1.54e-04, 1.92e-05, 2.40e-06, 3.01, 3.00, 3.00e-03),
    (2, "SD", 1.0): (1.46e-04, 1.82e-05, 2.27e-06, 3.00, 3.00, 5.00e-03),
    (2, "HU", 1.0): (1.35e-04, 1.68e-05, 2.09e-06, 3.01, 3.00, 7.00e-03),
    (2, "PLUS", 1.0): (1.14e-04, 1.44e-05, 1.79e-06, 2.98, 3.01, 7.50e-03),
    (2, "DG", 1.5): (9.24e-05, 1.16e-05, 1.44e-06, 2.99, 3.02, 3.00e-03),
    (2, "SD", 1.5): (9.95e-05, 1.21e-05, 1.56e-06, 3.04, 2.96, 4.20e-03),
    (2, "HU", 1.5): (8.48e-05, 1.03e-05, 1.32e-06, 3.04, 2.96, 4.20e-03),
    (2, "PLUS", 1.5): (6.61e-05, 7.94e-06, 9.99e-07, 3.06, 2.99, 4.20e-03),
    (3, "DG", 1.0): (1.60e-05, 2.00e-06, 2.49e-07, 3.01, 3.00, 1.00e-03),
    (3, "SD", 1.0): (1.47e-05, 1.84e-06, 2.30e-07, 3.00, 3.00, 1.80e-03),
    (3, "HU", 1.0): (1.31e-05, 1.64e-06, 2.04e-07, 3.00, 3.00, 2.10e-03),
    (3, "PLUS", 1.0): (8.28e-06, 1.02e-06, 1.28e-07, 3.01, 3.01, 2.30e-03),
    (3, "DG", 1.5): (1.51e-06, 9.79e-08, 6.13e-09, 3.94, 4.00, 1.00e-03),
    (3, "SD", 1.5): (1.37e-06, 8.59e-08, 5.44e-09, 3.99, 3.98, 1.20e-03),
    (3, "HU", 1.5): (1.16e-06, 7.31e-08, 4.63e-09, 3.99, 3.98, 1.20e-03),
    (3, "PLUS", 1.5): (8.39e-07, 5.25e-08, 3.32e-09, 4.00, 3.98, 1.20e-03),
}

TOLERANCES = {
    "2": ("abs", 0.05),
    "3": ("rel", 1e-3),
    "4": ("abs", 0.01),
    "5": ("abs", 1e-3),
    "6-error": ("rel", 0.02),
    "6-ooa": ("abs", 0.1),
    "6-dt": ("rel", 0.052),
}
TABLE_IDS = ("2", "3", "4", "5", "6", "7")


def t2_expected(p: int, c: str, kappa: str) -> float:
    return _T2_CELL_OVERRIDES.get((p, c, kappa), _T2_ROWS[p][c])


def t4_expected(p: int, c: str, kappa: str) -> float:
    return _T4_ROWS[p][c]


@dataclass(frozen=True)
class TableCell:
    table: str
    key: tuple
    quantity: str
    expected: float
    computed: float
    kind: str
    tol: float

    @property
    def deviation(self) -> float:
        diff = abs(self.computed - self.expected)
        return diff / abs(self.expected) if self.kind == "rel" else diff

    @property
    def ok(self) -> bool:
        # a hair of slack so values printed at the tolerance still pass
        return bool(np.isfinite(self.computed)) and self.deviation <= self.tol * (1 + 1e-9) + 1e-12


def _cell(table, key, quantity, expected, computed, tol_key) -> TableCell:
    kind, tol = TOLERANCES[tol_key]
    return TableCell(table, tuple(key), quantity, float(expected), float(computed), kind, tol)


def worker_count() -> int:
    env = os.environ.get("ESFRLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def run_jobs(fn: Callable, jobs: Sequence[tuple], workers: int | None = None) -> list:
    """``[fn(*job) for job in jobs]``, possibly in parallel; results keep job order."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _param_value(name: str):
    return float(name) if name[0].isdigit() else name


def equivalence_classes(params_list: Sequence[SchemeParams], n_elements: int = 32) -> list[int]:
    """Index of the first params whose assembled model-problem operator agrees to 1e-12.

    The operator is affine in the penalty, so agreement at penalties 0 and 1
    means agreement for every penalty: cells of one class produce identical
    trajectories and only one representative per class is integrated.
    """
    problem = ModelProblem()
    mesh = problem.mesh(n_elements)
    reps: list[tuple[int, np.ndarray]] = []
    out = []
    for i, params in enumerate(params_list):
        bc = problem.boundary_condition(mesh)
        mat = np.hstack([DiffusionScheme(params.with_penalty(v), mesh, bc).assemble().matrix
                         for v in (0.0, 1.0)])
        scale = max(np.abs(mat).max(), 1.0)
        for j, ref in reps:
            if ref.shape == mat.shape and np.max(np.abs(ref - mat)) <= 1e-12 * scale:
                out.append(j)
                break
        else:
            reps.append((i, mat))
            out.append(i)
    return out


def _search_job(p, c, kappa, flux, n_elements):
    params = SchemeParams.build(p, c=_param_value(c), kappa=_param_value(kappa), flux=flux)
    return find_penalty(params, n_elements=n_elements).value


def _penalty_table(table: str, flux: str, expected: Callable, theory: dict,
                   ps=(2, 3), cs=C_ROWS, kappas=KAPPA_COLS, workers=None) -> list[TableCell]:
    keys = [(p, c, k) for p in ps for c in cs for k in kappas]
    params = [SchemeParams.build(p, c=_param_value(c), kappa=_param_value(k), flux=flux) for p, c, k in keys]
    # classes are per p, since operators of different sizes never match
    cls = equivalence_classes(params)
    reps = sorted(set(cls))
    values = run_jobs(_search_job, [keys[i] + (flux, 32) for i in reps], workers)
    found = dict(zip(reps, values))
    mesh = make_uniform_mesh(0.0, 2 * pi, 32)
    cells = []
    for p in ps:
        th = tau_star_theory(p, mesh) if flux == "ip" else s_star(p)
        cells.append(_cell(table, (p, "theory"), "threshold", theory[p], th, table))
    for i, (p, c, k) in enumerate(keys):
        cells.append(_cell(table, (p, c, k), "penalty", expected(p, c, k), found[cls[i]], table))
    return cells


def table2(ps=(2, 3), cs=C_ROWS, kappas=KAPPA_COLS, workers=None) -> list[TableCell]:
    return _penalty_table("2", "ip", t2_expected, _T2_THEORY, ps, cs, kappas, workers)


def table4(ps=(2, 3), cs=C_ROWS, kappas=KAPPA_COLS, workers=None) -> list[TableCell]:
    return _penalty_table("4", "br2", t4_expected, _T4_THEORY, ps, cs, kappas, workers)


def lifting_factor_table(ps=tuple(T3), n_elements: int = 16) -> dict:
    """f from the numerical lifting solve for every node family, and the closed form."""
    j = pi / n_elements
    out = {}
    for p in ps:
        row = {"analytic": float(lifting_factor_analytic(p, j, j))}
        for fam in NodeFamily:
            basis = make_reference_basis(p, fam)
            row[fam.value] = -lifting_mean_numerical(basis, j, j, 1.0)
        out[p] = row
    return out


def table3(ps=tuple(T3), workers=None) -> list[TableCell]:
    cells = []
    for p, row in lifting_factor_table(ps).items():
        for name, val in row.items():
            cells.append(_cell("3", (p, name), "f", T3[p], val, "3"))
    return cells


def _dt_job(p, c, kappa, mult, flux, k_points):
    params = SchemeParams.build(p, c=_param_value(c), kappa=_param_value(kappa), flux=flux)
    return vonneumann.dt_max(nondimensional_penalty(params, mult), k_points)


def table5(ps=(2, 3), cs=("DG", "SD", "HU", "PLUS"), kappas=("DG", "PLUS"),
           mults=(1.0, 1.1, 1.5), k_points: int = vonneumann.DEFAULT_K_POINTS,
           workers=None) -> list[TableCell]:
    keys = [(p, c, k, m) for p in ps for c in cs for k in kappas for m in mults]
    values = run_jobs(_dt_job, [key + ("ip", k_points) for key in keys], workers)
    return [_cell("5", key, "dt_max", T5[(key[0], key[1], key[3])], v, "5")
            for key, v in zip(keys, values)]


def _convergence_job(p, c, kappa, mult, meshes, t_final):
    params = SchemeParams.build(p, c=_param_value(c), kappa=_param_value(kappa))
    rep = convergence_study(params, meshes=meshes, penalty_multiplier=mult, t_final=t_final)
    h = 2 * pi / meshes[0]
    return tuple(rep.errors), tuple(rep.orders), rep.dt_vn * h * h


def convergence_table(p: int, cs=("DG", "SD", "HU", "PLUS"), kappas=("DG", "PLUS"),
                      mults=(1.0, 1.5), meshes=(32, 64, 128), t_final: float = 1.0,
                      workers=None) -> list[TableCell]:
    table = "6" if p == 2 else "7"
    keys = [(p, c, k, m) for c in cs for k in kappas for m in mults]
    values = run_jobs(_convergence_job, [key + (tuple(meshes), t_final) for key in keys], workers)
    cells = []
    for key, (errs, ooas, dt32) in zip(keys, values):
        ref = T6_T7[(key[0], key[1], key[3])]
        for nk, e, r in zip(meshes, errs, ref[:3]):
            cells.append(_cell(table, key + (nk,), "l2_error", r, e, "6-error"))
        for i, (o, r) in enumerate(zip(ooas, ref[3:5])):
            cells.append(_cell(table, key + (f"{meshes[i]}/{meshes[i + 1]}",), "ooa", r, o, "6-ooa"))
        cells.append(_cell(table, key + (meshes[0],), "dt_max", ref[5], dt32, "6-dt"))
    return cells


def run_tables(ids: Sequence[str] = TABLE_IDS, workers=None) -> list[TableCell]:
    cells: list[TableCell] = []
    for tid in ids:
        if tid == "2":
            cells += table2(workers=workers)
        elif tid == "3":
            cells += table3()
        elif tid == "4":
            cells += table4(workers=workers)
        elif tid == "5":
            cells += table5(workers=workers)
        elif tid in ("6", "7"):
            cells += convergence_table(2 if tid == "6" else 3, workers=workers)
        else:
            raise ValueError(f"unknown table {tid!r}; choose from {', '.join(TABLE_IDS)}")
    return cells

