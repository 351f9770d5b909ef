"""Algebraic multilevel iteration for lowest-order H(curl) and H(div) problems.

The package assembles Nedelec (2D, curl) and Raviart-Thomas (3D, div) systems
on structured meshes, builds a hierarchical-basis level stack with exact
elimination of macro-element interior unknowns, and preconditions CG with
linear (polynomial) or nonlinear (inner Krylov) AMLI cycles.
"""

from .experiments import ExperimentConfig, preset, run_experiment
from .fem import assemble, assemble_rhs, x_error_norm
from .hierarchy import LevelStack, build_level_stack
from .krylov import SolveReport, fcg, pcg
from .mesh import MeshHierarchy, build_hierarchy, coefficient_field
from .preconditioner import AmliConfig, AmliPreconditioner, build_preconditioner

__all__ = [
    "AmliConfig",
    "AmliPreconditioner",
    "ExperimentConfig",
    "LevelStack",
    "MeshHierarchy",
    "SolveReport",
    "assemble",
    "assemble_rhs",
    "build_hierarchy",
    "build_level_stack",
    "build_preconditioner",
    "coefficient_field",
    "fcg",
    "pcg",
    "preset",
    "run_experiment",
    "x_error_norm",
]
