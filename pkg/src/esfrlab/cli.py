"""``esfrlab`` command line for the model-problem experiments and the reference tables."""

from __future__ import annotations

import argparse
import logging
import sys
from math import pi

import numpy as np

from esfrlab import tables, vonneumann
from esfrlab.config import ConfigError, RunConfig, load_config
from esfrlab.experiments import (
    BlowUpError,
    BracketingError,
    ModelProblem,
    build_scheme,
    cfl_time_step,
    convergence_study,
    find_penalty,
    initial_state,
    integrate,
    nondimensional_penalty,
    penalty_threshold,
)
from esfrlab.flux import FluxFamily, br2_penalty_from_ip, ip_penalty_from_br2
from esfrlab.mesh import l2_error
from esfrlab.report import render_csv, write_text
from esfrlab.solver import SchemeParams, tau_star_theory

logger = logging.getLogger("esfrlab")

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_DIFF = 0, 2, 3, 4

# CLI flag -> config field
_FLAGS = {
    "p": int, "c": str, "kappa": str, "flux": str, "tau": float, "tau_mult": float, "s": float,
    "beta": float, "elements": int, "nodes": str, "dt": float, "cfl": float, "t_final": float,
    "out": str, "k_points": int, "seed_dt": float, "seed": float,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="sectioned key = value file")
    common.add_argument("--p", type=int)
    common.add_argument("--c", help="number or preset (DG, SD, HU, PLUS)")
    common.add_argument("--kappa", help="number or preset (DG, SD, HU, PLUS)")
    common.add_argument("--flux", choices=("ldg", "ip", "br2"))
    common.add_argument("--tau", type=float)
    common.add_argument("--tau-mult", dest="tau_mult", type=float)
    common.add_argument("--s", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--elements", type=int)
    common.add_argument("--nodes", choices=("lgl", "gl", "equi"))
    common.add_argument("--dt", type=float)
    common.add_argument("--cfl", type=float)
    common.add_argument("--t-final", dest="t_final", type=float)
    common.add_argument("--out", metavar="PATH", help="CSV destination ('-' for stdout)")
    common.add_argument("--k-points", dest="k_points", type=int)
    common.add_argument("--seed-dt", dest="seed_dt", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="esfrlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="integrate the model problem")
    p = sub.add_parser("find-tau", parents=[common], help="smallest stable penalty")
    p.add_argument("--seed", type=float, help="unstable starting penalty")
    sub.add_parser("von-neumann", parents=[common], help="dissipation scan along k-tilde")
    sub.add_parser("dtmax", parents=[common], help="maximal RK54 time step grid")
    sub.add_parser("convergence", parents=[common], help="L2 errors and orders")
    p = sub.add_parser("tables", parents=[common], help="recompute the reference tables")
    p.add_argument("--tables", default=",".join(tables.TABLE_IDS),
                   help="comma separated subset of " + ",".join(tables.TABLE_IDS))
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    changes = {}
    for name in _FLAGS:
        val = getattr(args, name, None)
        if val is not None:
            changes[name] = val
    if "dt" in changes:
        changes["dt_policy"] = "fixed"
    elif "cfl" in changes:
        changes["dt_policy"] = "cfl"
    if changes:
        cfg = cfg.updated(**changes)
    return cfg.validate()


def problem_of(cfg: RunConfig) -> ModelProblem:
    return ModelProblem(cfg.x_min, cfg.x_max, cfg.b, cfg.boundary, cfg.initial)


def base_params(cfg: RunConfig, c=None, kappa=None) -> SchemeParams:
    return SchemeParams.build(cfg.p, c=cfg.c if c is None else c, kappa=cfg.kappa if kappa is None else kappa,
                              flux=cfg.flux, beta=cfg.beta, nodes=cfg.nodes, b=cfg.b)


def scheme_params(cfg: RunConfig, mesh) -> SchemeParams:
    """Parameters with the penalty resolved on ``mesh`` (explicit value or multiplier)."""
    params = base_params(cfg)
    j = float(mesh.jacobians[0])
    if params.flux.family is FluxFamily.BR2:
        if cfg.s is not None:
            return params.with_penalty(cfg.s)
        if cfg.tau is not None:
            return params.with_penalty(float(br2_penalty_from_ip(cfg.tau, cfg.p, j, j)))
        return params.with_penalty(cfg.tau_mult * penalty_threshold(params, mesh))
    if cfg.tau is not None:
        return params.with_penalty(cfg.tau)
    return params.with_penalty(cfg.tau_mult * tau_star_theory(cfg.p, mesh))


def _sweep(cfg: RunConfig, args) -> tuple[tuple, tuple, tuple]:
    cs = (cfg.c,) if getattr(args, "c", None) else cfg.c_list
    ks = (cfg.kappa,) if getattr(args, "kappa", None) else cfg.kappa_list
    ms = (cfg.tau_mult,) if getattr(args, "tau_mult", None) else cfg.tau_mults
    return cs, ks, ms


def _meta(cfg: RunConfig, command: str, **extra) -> dict:
    meta = {"command": command, "p": cfg.p, "flux": cfg.flux, "nodes": cfg.nodes}
    meta.update(extra)
    return meta


def _emit(cfg: RunConfig, csv_text: str, summary: list[str]) -> None:
    write_text(cfg.out, csv_text)
    stream = sys.stderr if cfg.out in (None, "-") else sys.stdout
    stream.write("\n".join(summary) + "\n")


def _time_step(cfg: RunConfig, scheme, policy: str) -> float:
    if policy == "fixed":
        return cfg.dt
    if policy == "vn_max":
        params = nondimensional_penalty(base_params(cfg), cfg.tau_mult)
        h = float(np.max(scheme.mesh.sizes))
        return cfg.dt_safety * vonneumann.dt_max(params, cfg.k_points, cfg.seed_dt) * h * h / cfg.b
    return cfl_time_step(scheme, cfg.cfl)


def cmd_solve(cfg: RunConfig, args=None) -> int:
    problem = problem_of(cfg)
    mesh = problem.mesh(cfg.elements)
    params = scheme_params(cfg, mesh)
    scheme = build_scheme(params, problem, cfg.elements)
    op = scheme.assemble()
    policy = "cfl" if cfg.dt_policy == "auto" else cfg.dt_policy
    dt = _time_step(cfg, scheme, policy)
    rows = []

    def monitor(step, t, u):
        rep = scheme.energy_report(u, t)
        err = l2_error(mesh, scheme.basis, u, problem.exact, t) if cfg.initial == "model" else \
            float(np.sqrt(scheme.broken_norm_sq(u, 0.0)))
        rows.append((step, t, err, rep.u_norm_sq, rep.energy_rate))

    status, detail = EXIT_OK, "completed"
    try:
        traj = integrate(op, initial_state(scheme, problem), cfg.t_final, dt, cfg.u_max,
                         monitor, cfg.every)
        dt = traj.dt
    except BlowUpError as exc:
        status, detail = EXIT_BLOWUP, str(exc)
    meta = _meta(cfg, "solve", c=params.c.label, kappa=params.kappa.label, penalty=params.flux.penalty,
                 elements=cfg.elements, dt=dt, t_final=cfg.t_final, boundary=cfg.boundary)
    text = render_csv(("step", "t", "l2_error", "u_norm_sq", "energy_rate"), rows, meta)
    norms = [r[3] for r in rows]
    increasing = sum(1 for a, b in zip(norms, norms[1:]) if b > a * (1 + 1e-12) + 1e-300)
    summary = [
        f"status: {detail}",
        f"penalty: {params.flux.penalty:.9g}",
        f"dt: {dt:.9g}",
        f"final l2_error: {rows[-1][2]:.9g}" if rows else "final l2_error: n/a",
        f"energy increases: {increasing}",
    ]
    _emit(cfg, text, summary)
    return status


def cmd_find_tau(cfg: RunConfig, args=None) -> int:
    problem = problem_of(cfg)
    mesh = problem.mesh(cfg.elements)
    params = base_params(cfg)
    cfl = cfg.cfl
    if cfg.dt_policy not in ("auto", "cfl"):
        raise ConfigError("find-tau uses the cfl time-step policy")
    search = find_penalty(params, problem, cfg.elements, cfg.seed, cfg.levels, cfg.first_step,
                          cfg.t_final, cfl, cfg.u_max)
    j = float(mesh.jacobians[0])
    br2 = params.flux.family is FluxFamily.BR2
    rows = []
    for i, pr in enumerate(search.history):
        other = ip_penalty_from_br2(pr.penalty, cfg.p, j, j) if br2 else br2_penalty_from_ip(pr.penalty, cfg.p, j, j)
        rows.append((i, pr.level, pr.penalty, float(other), pr.stable))
    name, other_name = ("s", "tau") if br2 else ("tau", "s")
    meta = _meta(cfg, "find-tau", c=params.c.label, kappa=params.kappa.label, elements=cfg.elements,
                 cfl=cfl, t_final=cfg.t_final, u_max=cfg.u_max, table="4" if br2 else "2")
    text = render_csv(("probe", "level", name, other_name, "stable"), rows, meta)
    theory = penalty_threshold(params, mesh)
    summary = [
        f"{name}_numerical: {search.value:.9g}",
        f"{name}_theory: {theory:.9g}",
        f"probes: {search.n_probes}",
        f"numerical <= theory: {search.value <= theory + 1e-12}",
    ]
    _emit(cfg, text, summary)
    return EXIT_OK


def cmd_von_neumann(cfg: RunConfig, args=None) -> int:
    params = nondimensional_penalty(base_params(cfg), cfg.tau_mult)
    if cfg.tau is not None and params.flux.family is not FluxFamily.BR2:
        params = params.with_penalty(cfg.tau)
    if cfg.s is not None and params.flux.family is FluxFamily.BR2:
        params = params.with_penalty(cfg.s)
    scan = vonneumann.dissipation_curve(params, cfg.k_points)
    rows = []
    for m in range(scan.n_modes):
        for j, k in enumerate(scan.k_grid):
            kt = scan.extended_k[m, j]
            lam = scan.eigenvalues[m, j]
            rows.append((k, m + 1, kt, lam.real, lam.imag, scan.r_mode[m, j], scan.r_energy[m, j], -kt * kt))
    meta = _meta(cfg, "von-neumann", c=params.c.label, kappa=params.kappa.label,
                 penalty=params.flux.penalty, k_points=cfg.k_points)
    text = render_csv(("k", "mode", "k_tilde", "re_lambda", "im_lambda", "r_mode", "r_energy", "exact"),
                      rows, meta)
    jumps = vonneumann.jump_locations(scan)
    summary = [
        f"max re_lambda: {scan.eigenvalues.real.max():.3e}",
        f"max |im_lambda|: {np.abs(scan.eigenvalues.imag).max():.3e}",
        "jumps (k_tilde/pi): " + ", ".join(f"{j / pi:.3f}" for j in jumps),
    ]
    _emit(cfg, text, summary)
    return EXIT_OK


def _dtmax_job(p, c, kappa, mult, flux, beta, nodes, k_points, seed_dt, tolerance):
    params = SchemeParams.build(p, c=c, kappa=kappa, flux=flux, beta=beta, nodes=nodes)
    return vonneumann.dt_max(nondimensional_penalty(params, mult), k_points, seed_dt, tolerance)


def cmd_dtmax(cfg: RunConfig, args=None) -> int:
    cs, ks, ms = _sweep(cfg, args)
    keys = [(c, k, m) for c in cs for k in ks for m in ms]
    jobs = [(cfg.p, c, k, m, cfg.flux, cfg.beta, cfg.nodes, cfg.k_points, cfg.seed_dt, cfg.tolerance)
            for c, k, m in keys]
    values = tables.run_jobs(_dtmax_job, jobs)
    ldg = [None] * len(keys)
    if cfg.ldg_column:
        ldg = tables.run_jobs(_dtmax_job, [j[:4] + ("ldg", 0.5) + j[6:] for j in jobs])
    rows = [(c, k, m, v, w) for (c, k, m), v, w in zip(keys, values, ldg)]
    meta = _meta(cfg, "dtmax", k_points=cfg.k_points, table="5")
    text = render_csv(("c", "kappa", "tau_mult", "dt_max", "dt_max_ldg"), rows, meta)
    summary = [f"{c:>6} {k:>6} {m:4.2f}  {v:.4e}" for c, k, m, v, _ in rows]
    _emit(cfg, text, summary)
    return EXIT_OK


def _convergence_job(cfg: RunConfig, c, kappa, mult):
    params = base_params(cfg, c, kappa)
    policy = "vn_max" if cfg.dt_policy == "auto" else cfg.dt_policy
    return convergence_study(params, problem_of(cfg), cfg.meshes, mult, cfg.t_final, policy, cfg.dt,
                             cfg.cfl, cfg.dt_safety, cfg.k_points)


def cmd_convergence(cfg: RunConfig, args=None) -> int:
    cs, ks, ms = _sweep(cfg, args)
    keys = [(c, k, m) for c in cs for k in ks for m in ms]
    reports = tables.run_jobs(_convergence_job, [(cfg,) + key for key in keys])
    rows, summary = [], []
    target = cfg.p + 1
    for (c, k, m), rep in zip(keys, reports):
        for r in rep.rows:
            rows.append((c, k, m, r.n_elements, r.l2_error, r.ooa, r.dt, r.steps))
        last = rep.orders[-1] if rep.orders else float("nan")
        note = "order loss" if last < target - 0.5 else "expected order"
        summary.append(f"{c:>6} {k:>6} {m:4.2f}  OOA {', '.join(f'{o:.2f}' for o in rep.orders)}  ({note})")
    meta = _meta(cfg, "convergence", t_final=cfg.t_final, boundary=cfg.boundary,
                 dt_policy=cfg.dt_policy, dt_safety=cfg.dt_safety, table="6" if cfg.p == 2 else "7")
    text = render_csv(("c", "kappa", "tau_mult", "elements", "l2_error", "ooa", "dt", "steps"), rows, meta)
    _emit(cfg, text, summary)
    return EXIT_OK


def cmd_tables(cfg: RunConfig, args=None) -> int:
    ids = [t.strip() for t in (args.tables if args is not None else ",".join(tables.TABLE_IDS)).split(",")
           if t.strip()]
    bad = [t for t in ids if t not in tables.TABLE_IDS]
    if bad:
        raise ConfigError(f"--tables: unknown table id(s) {', '.join(bad)}")
    cells = sorted(tables.run_tables(ids), key=lambda c: (c.table, tuple(map(str, c.key)), c.quantity))
    rows = [(c.table, "/".join(map(str, c.key)), c.quantity, c.expected, c.computed, c.deviation,
             c.kind, c.tol, c.ok) for c in cells]
    meta = {"command": "tables", "table": ",".join(ids)}
    text = render_csv(("table", "key", "quantity", "expected", "computed", "deviation", "kind", "tol", "ok"),
                      rows, meta)
    summary = []
    for tid in ids:
        mine = [c for c in cells if c.table == tid]
        n_ok = sum(c.ok for c in mine)
        summary.append(f"table {tid}: {n_ok}/{len(mine)} cells within tolerance")
    _emit(cfg, text, summary)
    return EXIT_OK if all(c.ok for c in cells) else EXIT_DIFF


COMMANDS = {
    "solve": cmd_solve,
    "find-tau": cmd_find_tau,
    "von-neumann": cmd_von_neumann,
    "dtmax": cmd_dtmax,
    "convergence": cmd_convergence,
    "tables": cmd_tables,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, BracketingError) as exc:
        print(f"esfrlab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
