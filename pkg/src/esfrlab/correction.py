"""ESFR (VCJH) correction functions and their parameter presets.

The left/right correction functions of degree p+1 are

    g_L = (-1)**p / 2 * [Psi_p - (eta Psi_{p-1} + Psi_{p+1}) / (1 + eta)]
    g_R =         1 / 2 * [Psi_p + (eta Psi_{p-1} + Psi_{p+1}) / (1 + eta)]

with eta = k (2p+1) (a_p p!)**2 / 2.  The same family is used for the
auxiliary equation (parameter kappa, functions g) and the primary equation
(parameter c, functions h).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from esfrlab.legendre import leading_coefficient, legendre_table

# Correction-parameter values for p = 2..5 (DG, spectral difference, g2,
# and the largest-time-step value c_+ found for RK54).
PRESETS: dict[str, dict[int, float]] = {
    "SD": {2: 2.96e-02, 3: 9.52e-04, 4: 1.61e-05, 5: 1.70e-07},
    "HU": {2: 6.67e-02, 3: 1.69e-03, 4: 2.52e-05, 5: 2.44e-07},
    "PLUS": {2: 1.86e-01, 3: 3.67e-03, 4: 4.79e-05, 5: 4.24e-07},
}
PRESET_NAMES = ("DG", "SD", "HU", "PLUS")
_ALIASES = {"C+": "PLUS", "+": "PLUS", "K+": "PLUS", "G2": "HU", "HUYNH": "HU"}


@dataclass(frozen=True)
class EsfrParam:
    p: int
    value: float
    preset_name: str = "CUSTOM"

    def __post_init__(self):
        if self.value < 0:
            raise ValueError(f"negative ESFR parameter {self.value} is not supported")
        if self.preset_name == "DG" and self.value != 0.0:
            raise ValueError("the DG preset has value 0")

    @property
    def label(self) -> str:
        return self.preset_name if self.preset_name != "CUSTOM" else f"{self.value:g}"


def preset_value(name: str, p: int) -> float:
    key = _ALIASES.get(name.upper(), name.upper())
    if key == "DG":
        return 0.0
    try:
        return PRESETS[key][p]
    except KeyError:
        raise ValueError(f"no tabulated value for preset {name!r} at p={p}") from None


def make_param(spec, p: int) -> EsfrParam:
    """Build an :class:`EsfrParam` from a preset name or a number."""
    if isinstance(spec, EsfrParam):
        if spec.p != p:
            raise ValueError(f"parameter built for p={spec.p}, scheme uses p={p}")
        return spec
    if isinstance(spec, str):
        key = _ALIASES.get(spec.strip().upper(), spec.strip().upper())
        if key in PRESET_NAMES:
            return EsfrParam(p, preset_value(key, p), key)
        try:
            spec = float(spec)
        except ValueError:
            raise ValueError(f"unknown ESFR preset {spec!r}") from None
    return EsfrParam(p, float(spec))


def eta(p: int, k: float) -> float:
    if p < 1:
        raise ValueError("correction functions need p >= 1")
    ap = leading_coefficient(p)
    return k * (2 * p + 1) * (ap * factorial(p)) ** 2 / 2.0


def _blend(p: int, k: float, r, nderiv: int):
    e = eta(p, k)
    tab = legendre_table(p + 1, r, nderiv)
    mix = (e * tab[:, p - 1] + tab[:, p + 1]) / (1.0 + e)
    return tab[:, p], mix


def g_left(p: int, k: float, r, deriv: int = 0):
    """Left correction function (or its ``deriv``-th derivative) at ``r``."""
    psi, mix = _blend(p, k, r, deriv)
    return (-1) ** p / 2.0 * (psi[deriv] - mix[deriv])


def g_right(p: int, k: float, r, deriv: int = 0):
    psi, mix = _blend(p, k, r, deriv)
    return 0.5 * (psi[deriv] + mix[deriv])


def dg_left_endpoints(p: int, k: float) -> tuple[float, float]:
    """Closed-form (g_L'(-1), g_L'(1)) for the left correction function."""
    e = eta(p, k)
    x = (e * p * (p - 1) + (p + 1) * (p + 2)) / (1.0 + e)
    return -0.25 * (p * (p + 1) + x), (-1) ** p / 4.0 * (p * (p + 1) - x)


def kappa_min(p: int) -> float:
    ap = leading_coefficient(p)
    return 2.0 * (p + 1) / (p * (2 * p + 1) * (ap * factorial(p)) ** 2)


def _gap(p: int, k: float) -> float:
    m1, p1 = dg_left_endpoints(p, k)
    return abs(p1) - m1


def stability_gap(p: int, check: bool = True) -> float:
    """min over kappa of |g_L'(1)| - g_L'(-1), reached for kappa >= kappa_min.

    With ``check`` the closed form is confirmed against a log sweep of
    kappa over [1e-8, 1e8].
    """
    gap = _gap(p, kappa_min(p))
    if check:
        sweep = min(_gap(p, k) for k in np.logspace(-8, 8, 101))
        if sweep < gap - 1e-9:
            raise ArithmeticError(f"kappa sweep found gap {sweep} below closed form {gap}")
    return gap


@dataclass(frozen=True)
class CorrectionSet:
    """Correction-function derivatives at the solution nodes for (p, c, kappa)."""

    p: int
    c_param: EsfrParam
    kappa_param: EsfrParam
    dgl_at_nodes: np.ndarray
    dgr_at_nodes: np.ndarray
    dhl_at_nodes: np.ndarray
    dhr_at_nodes: np.ndarray
    dgl_m1: float
    dgl_p1: float
    dgr_m1: float
    dgr_p1: float


def make_correction_set(p: int, c, kappa, nodes) -> CorrectionSet:
    c_param = make_param(c, p)
    k_param = make_param(kappa, p)
    nodes = np.asarray(nodes, dtype=float)
    kv, cv = k_param.value, c_param.value
    dgl_m1, dgl_p1 = dg_left_endpoints(p, kv)
    ends = np.array([-1.0, 1.0])
    dgr_m1, dgr_p1 = g_right(p, kv, ends, 1)
    return CorrectionSet(
        p=p,
        c_param=c_param,
        kappa_param=k_param,
        dgl_at_nodes=g_left(p, kv, nodes, 1),
        dgr_at_nodes=g_right(p, kv, nodes, 1),
        dhl_at_nodes=g_left(p, cv, nodes, 1),
        dhr_at_nodes=g_right(p, cv, nodes, 1),
        dgl_m1=dgl_m1,
        dgl_p1=dgl_p1,
        dgr_m1=float(dgr_m1),
        dgr_p1=float(dgr_p1),
    )
