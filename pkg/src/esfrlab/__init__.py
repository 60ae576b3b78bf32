"""Energy-stable flux reconstruction for 1D diffusion: semi-discrete operators and their stability analysis."""

from esfrlab.correction import EsfrParam, make_param, stability_gap
from esfrlab.mesh import Mesh1D, NodeFamily, make_reference_basis, make_uniform_mesh
from esfrlab.solver import (
    PERIODIC,
    DiffusionOperator,
    DiffusionScheme,
    SchemeParams,
    dirichlet,
    rk54_step,
    tau_star_theory,
)

__version__ = "0.1.0"

__all__ = [
    "EsfrParam",
    "make_param",
    "stability_gap",
    "Mesh1D",
    "NodeFamily",
    "make_reference_basis",
    "make_uniform_mesh",
    "PERIODIC",
    "DiffusionOperator",
    "DiffusionScheme",
    "SchemeParams",
    "dirichlet",
    "rk54_step",
    "tau_star_theory",
]
