"""Diffuse domain approximations of bulk, surface and coupled elliptic problems on a box."""

from __future__ import annotations

from .assembly import ProblemSpec, SparseSystem, assemble, eliminate_degenerate_dofs, spd_probe
from .config import ConfigError, RunConfig, load_config, parse_config
from .fields import BoxGrid, NodalField, constant_normal_extension, dirichlet_lifting, neumann_lifting, reflection_extension
from .geometry import Circle, Ellipse, make_geometry
from .harness import run_single, run_sweep, verify_lemmas, write_report
from .norms import delta_functional, restricted_h1_error, surface_norm_exact, weighted_norm
from .oracle import robin_penalty_study, solve_sharp_disc
from .profiles import ScaledWeights, get_profile, verify_profile
from .quadrature import QuadSpec
from .solve import cg_solve

__all__ = [
    "BoxGrid", "Circle", "ConfigError", "Ellipse", "NodalField", "ProblemSpec", "QuadSpec", "RunConfig",
    "ScaledWeights", "SparseSystem", "assemble", "cg_solve", "constant_normal_extension", "delta_functional",
    "dirichlet_lifting", "eliminate_degenerate_dofs", "get_profile", "load_config", "make_geometry",
    "neumann_lifting", "parse_config", "reflection_extension", "restricted_h1_error", "robin_penalty_study",
    "run_single", "run_sweep", "solve_sharp_disc", "spd_probe", "surface_norm_exact", "verify_lemmas",
    "verify_profile", "weighted_norm", "write_report",
]
