from __future__ import annotations

import numpy as np
import pytest

from esfrlab.flux import lifting_factor_analytic
from esfrlab.mesh import Mesh1D, make_uniform_mesh
from esfrlab.solver import (
    PERIODIC,
    RK54_AMPLIFICATION,
    BoundaryCondition,
    DiffusionScheme,
    SchemeParams,
    dirichlet,
    rk54_amplification,
    rk54_amplification_from_stages,
    rk54_step,
    tau_star_per_edge,
    tau_star_theory,
)

KAPPAS = ("DG", "SD", "HU", "PLUS", "1e5", 0.7)
PAIRS = [("DG", "DG"), ("SD", "HU"), ("HU", "PLUS"), ("PLUS", "DG"), ("1e5", "SD")]


def _kappa(name):
    return float(name) if isinstance(name, str) and name[0].isdigit() else name


def nonuniform_mesh(n=7, seed=3):
    rng = np.random.default_rng(seed)
    return Mesh1D(np.concatenate([[0.0], np.cumsum(rng.uniform(0.3, 1.2, n))]))


def _bc(kind, mesh):
    if kind == "periodic":
        return PERIODIC
    return dirichlet(lambda x, t: np.cos(x) * np.exp(-t), mesh)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
@pytest.mark.parametrize("flux,pen", [("ip", 2.5), ("br2", 0.8)])
@pytest.mark.parametrize("bc", ["periodic", "dirichlet"])
def test_operator_independent_of_kappa(p, flux, pen, bc):
    mesh = nonuniform_mesh()
    mats = []
    for k in KAPPAS:
        if isinstance(k, str) and k not in ("DG", "1e5") and p not in (2, 3, 4):
            continue
        params = SchemeParams.build(p, c="DG" if p == 1 else "SD", kappa=_kappa(k), flux=flux,
                                    tau=pen, s=pen)
        op = DiffusionScheme(params, mesh, _bc(bc, mesh)).assemble()
        mats.append(np.concatenate([op.matrix.ravel(), op.inject_left, op.inject_right]))
    scale = np.max(np.abs(mats[0]))
    for m in mats[1:]:
        assert np.max(np.abs(m - mats[0])) <= 1e-12 * scale


def test_ldg_operator_depends_on_kappa():
    mesh = make_uniform_mesh(0, 1, 6)
    a = DiffusionScheme(SchemeParams.build(2, flux="ldg", tau=1.0), mesh).assemble().matrix
    b = DiffusionScheme(SchemeParams.build(2, kappa="PLUS", flux="ldg", tau=1.0), mesh).assemble().matrix
    assert np.max(np.abs(a - b)) > 1e-6


@pytest.mark.parametrize("p", [1, 2, 3, 5])
@pytest.mark.parametrize("c", ["DG", 0.01])
@pytest.mark.parametrize("bc", ["periodic", "dirichlet"])
def test_br2_equals_ip(p, c, bc):
    mesh = nonuniform_mesh(6, seed=p)
    s = 0.9
    br2 = DiffusionScheme(SchemeParams.build(p, c=c, flux="br2", s=s), mesh, _bc(bc, mesh))
    jl, jr = br2._edge_jacobians()
    tau = s * lifting_factor_analytic(p, jl, jr)
    ip = DiffusionScheme(SchemeParams.build(p, c=c, flux="ip", tau=tau), mesh, _bc(bc, mesh))
    a, b = br2.assemble(), ip.assemble()
    scale = np.max(np.abs(b.matrix))
    assert np.max(np.abs(a.matrix - b.matrix)) <= 1e-12 * scale
    assert np.max(np.abs(a.inject_left - b.inject_left)) <= 1e-12 * scale


@pytest.mark.parametrize("flux", ["ip", "br2", "ldg"])
@pytest.mark.parametrize("bc", ["periodic", "dirichlet"])
def test_assembled_operator_matches_rhs(flux, bc):
    mesh = nonuniform_mesh(5)
    scheme = DiffusionScheme(SchemeParams.build(3, c="HU", kappa="SD", flux=flux, tau=4.0, s=1.0),
                             mesh, _bc(bc, mesh))
    op = scheme.assemble()
    u = np.random.default_rng(1).normal(size=scheme.size)
    for t in (0.0, 0.3):
        assert np.allclose(op(u, t), scheme.evaluate_rhs(u, t), atol=1e-10)
    assert op.block_row(0)[1].shape == (4, 4)
    assert np.array_equal(op.C_zero, op.block(1, 1))
    assert np.array_equal(op.C_minus, op.block(1, 0)) and np.array_equal(op.C_plus, op.block(1, 2))


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_polynomial_exactness(p):
    # the scheme differentiates polynomials of degree <= p exactly in the interior
    mesh = make_uniform_mesh(-1.0, 1.0, 4)
    exact = lambda x, t: x**p  # noqa: E731
    for c, k in PAIRS[:2] if p in (2, 3) else [("DG", "DG")]:
        scheme = DiffusionScheme(SchemeParams.build(p, c=c, kappa=k, tau=7.0), mesh, dirichlet(exact, mesh))
        x = mesh.node_coordinates(scheme.basis.nodes)
        rhs = scheme.evaluate_rhs(exact(x, 0.0), 0.0)
        ref = p * (p - 1) * x ** (p - 2) if p >= 2 else np.zeros_like(x)
        assert np.max(np.abs(rhs - ref)) < 1e-9 * max(1, np.max(np.abs(ref)))
        q = scheme.auxiliary(exact(x, 0.0))
        assert np.max(np.abs(q - p * x ** (p - 1))) < 1e-10


@pytest.mark.parametrize("c,k", PAIRS)
@pytest.mark.parametrize("flux", ["ip", "br2"])
def test_energy_identity(c, k, flux):
    mesh = make_uniform_mesh(0, 2 * np.pi, 8)
    scheme = DiffusionScheme(SchemeParams.build(2, c=_kappa(c), kappa=_kappa(k), flux=flux, tau=1.3, s=0.2), mesh)
    u = np.random.default_rng(7).normal(size=scheme.size)
    rep = scheme.energy_report(u)
    assert rep.energy_rate == pytest.approx(-rep.q_norm_sq + rep.theta_sum, rel=1e-10, abs=1e-10)
    assert rep.u_norm_sq == pytest.approx(scheme.broken_norm_sq(u, scheme.params.c.value))


@pytest.mark.parametrize("p", [2, 3])
@pytest.mark.parametrize("c,k", PAIRS)
@pytest.mark.parametrize("mult", [1.0, 1.5])
@pytest.mark.parametrize("bc", ["periodic", "zero"])
def test_energy_decays_above_threshold(p, c, k, mult, bc):
    mesh = nonuniform_mesh(10, seed=p)
    tau = mult * tau_star_per_edge(p, mesh, periodic=bc == "periodic")
    boundary = PERIODIC if bc == "periodic" else BoundaryCondition("dirichlet")
    scheme = DiffusionScheme(SchemeParams.build(p, c=_kappa(c), kappa=_kappa(k), tau=tau), mesh, boundary)
    op = scheme.assemble()
    rng = np.random.default_rng(11)
    u = rng.normal(size=scheme.size)
    dt = 0.5 * 1.0 / np.max(np.abs(np.linalg.eigvals(op.matrix)))
    cval = scheme.params.c.value
    energy = scheme.broken_norm_sq(u, cval)
    for i in range(60):
        rep = scheme.energy_report(u)
        assert rep.energy_rate <= 1e-10 * rep.u_norm_sq
        u = rk54_step(op, u, i * dt, dt)
        new = scheme.broken_norm_sq(u, cval)
        assert new <= energy * (1 + 1e-12)
        energy = new


def test_energy_rate_sign_random_states():
    # at tau >= tau* every state has a non-positive rate, whatever its shape
    mesh = make_uniform_mesh(0, 2 * np.pi, 6)
    rng = np.random.default_rng(5)
    for p in (2, 3):
        scheme = DiffusionScheme(SchemeParams.build(p, c="HU", kappa="SD", tau=tau_star_theory(p, mesh)), mesh)
        for _ in range(200):
            u = rng.normal(size=scheme.size) * rng.uniform(0.1, 10)
            assert scheme.energy_report(u).energy_rate <= 1e-10 * scheme.broken_norm_sq(u, 0.0)


def test_thresholds():
    mesh = make_uniform_mesh(0, 2 * np.pi, 32)
    assert tau_star_theory(2, mesh) == pytest.approx(15.28, abs=0.01)
    assert tau_star_theory(3, mesh) == pytest.approx(30.56, abs=0.01)
    per_edge = tau_star_per_edge(2, mesh, periodic=True)
    assert np.allclose(per_edge, tau_star_theory(2, mesh))
    assert tau_star_per_edge(2, mesh).shape == (33,)


def test_rk54():
    z = np.array([-0.5, -2.0 + 1.0j, 0.3j])
    for zi in z:
        assert abs(rk54_amplification(zi) - rk54_amplification_from_stages(zi)) < 1e-13
    assert RK54_AMPLIFICATION[-1] == pytest.approx(1 / 200)
    errs = []
    for n in (10, 20, 40):
        u, dt = np.array([1.0]), 1.0 / n
        for i in range(n):
            u = rk54_step(lambda v, t: -v + np.cos(t), u, i * dt, dt)
        exact = 0.5 * (np.cos(1) + np.sin(1)) + 0.5 * np.exp(-1)
        errs.append(abs(u[0] - exact))
    assert np.log2(errs[0] / errs[1]) > 3.8 and np.log2(errs[1] / errs[2]) > 3.8
    with pytest.raises(ValueError):
        rk54_step(lambda v, t: v, np.ones(1), 0.0, 0.0)


def test_parameter_validation():
    with pytest.raises(ValueError):
        SchemeParams.build(2, b=0.0)
    with pytest.raises(ValueError):
        BoundaryCondition("neumann")
    params = SchemeParams.build(2, flux="br2", s=0.1)
    assert params.with_penalty(0.4).flux.s == 0.4
    assert params.with_kappa("PLUS").kappa.preset_name == "PLUS"
    mesh = make_uniform_mesh(0, 1, 3)
    with pytest.raises(ValueError):
        from esfrlab.mesh import make_reference_basis

        DiffusionScheme(params, mesh, basis=make_reference_basis(3))
