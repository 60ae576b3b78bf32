from __future__ import annotations

import numpy as np
import pytest

from esfrlab.flux import (
    EdgeTrace,
    FluxChoice,
    FluxFamily,
    br2_penalty_from_ip,
    ip_penalty_from_br2,
    jump,
    lifting_factor_analytic,
    lifting_mean_numerical,
    lifting_polynomials_numerical,
    lifting_profile_analytic,
    mean,
    s_star,
    viscous_numerical_flux,
)
from esfrlab.mesh import NodeFamily, make_reference_basis

JACOBIANS = [(0.5, 0.5), (0.1, 0.37), (2.0, 0.25)]


@pytest.mark.parametrize("family", list(NodeFamily))
@pytest.mark.parametrize("p", range(1, 9))
@pytest.mark.parametrize("jl,jr", JACOBIANS)
def test_lifting_operator_from_correction_functions(family, p, jl, jr):
    basis = make_reference_basis(p, family)
    left, right = lifting_polynomials_numerical(basis, jl, jr, 1.7)
    ref_l = lifting_profile_analytic(basis, jl, jr, 1.7, "left")
    ref_r = lifting_profile_analytic(basis, jl, jr, 1.7, "right")
    scale = max(np.max(np.abs(ref_l)), np.max(np.abs(ref_r)))
    assert np.max(np.abs(left - ref_l)) < 1e-10 * scale
    assert np.max(np.abs(right - ref_r)) < 1e-10 * scale


@pytest.mark.parametrize("family", list(NodeFamily))
@pytest.mark.parametrize("p", range(1, 9))
@pytest.mark.parametrize("jl,jr", JACOBIANS)
def test_lifting_mean_factor(family, p, jl, jr):
    basis = make_reference_basis(p, family)
    f = lifting_factor_analytic(p, jl, jr)
    assert -lifting_mean_numerical(basis, jl, jr, 1.0) == pytest.approx(f, rel=1e-11)
    assert lifting_mean_numerical(basis, jl, jr, -2.0) == pytest.approx(2 * f, rel=1e-11)


def test_lifting_argument_checks():
    basis = make_reference_basis(2)
    with pytest.raises(ValueError):
        lifting_mean_numerical(basis, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        lifting_factor_analytic(2, -1.0, 1.0)
    with pytest.raises(ValueError):
        lifting_profile_analytic(basis, 1.0, 1.0, 1.0, "middle")


@pytest.mark.parametrize("p", range(1, 9))
def test_penalty_conversions(p):
    tau = 3.3
    for jl, jr in JACOBIANS:
        s = br2_penalty_from_ip(tau, p, jl, jr)
        assert float(s) * float(lifting_factor_analytic(p, jl, jr)) == pytest.approx(tau)
        assert float(ip_penalty_from_br2(s, p, jl, jr)) == pytest.approx(tau)
    assert s_star(p) == pytest.approx(p / (p + 1), rel=1e-12)


def test_jump_and_mean():
    assert jump(3.0, 1.0) == 2.0
    assert mean(3.0, 1.0) == 2.0
    assert np.allclose(jump(np.array([1.0, 2.0]), np.array([0.5, 4.0])), [0.5, -2.0])


def test_numerical_fluxes():
    tr = EdgeTrace(u_minus=2.0, u_plus=1.0, du_minus=0.4, du_plus=0.2, q_minus=1.0, q_plus=3.0)
    u, q = viscous_numerical_flux(FluxChoice("ip", tau=5.0), tr)
    assert (u, q) == pytest.approx((1.5, 0.3 - 5.0))
    u, q = viscous_numerical_flux(FluxChoice("br2", s=2.0), tr, lifting_mean=-0.25)
    assert (u, q) == pytest.approx((1.5, 0.3 - 0.5))
    u, q = viscous_numerical_flux(FluxChoice("ldg", tau=1.0, beta=0.5), tr)
    assert u == pytest.approx(1.0)  # upwinded to the plus side
    assert q == pytest.approx(2.0 - 1.0 - 1.0)
    with pytest.raises(ValueError):
        viscous_numerical_flux(FluxChoice("br2", s=1.0), tr)


def test_flux_choice():
    fc = FluxChoice("BR2", tau=1.0, s=0.5)
    assert fc.family is FluxFamily.BR2 and fc.penalty == 0.5
    assert fc.with_penalty(0.9).s == 0.9
    assert FluxChoice("ip", tau=2.0).with_penalty(4.0).tau == 4.0
    with pytest.raises(ValueError):
        FluxFamily.parse("central")
