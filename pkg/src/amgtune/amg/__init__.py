"""Classical algebraic multigrid: strength, CLJP coarsening, interpolation,
Galerkin hierarchy, smoothers, V-cycle and the stationary solve loop."""
from .cljp import C_POINT, F_POINT, CfSplitting, cljp_split
from .hierarchy import AmgConfig, Hierarchy, Level, galerkin_coarsen, setup_hierarchy
from .interpolation import InterpolationError, build_interpolation
from .smoothers import SmootherBreakdownError, SmootherSpec, smooth
from .solve import SolveStats, amg_solve, solve_with_hierarchy, vcycle, work_units
from .strength import StrengthGraph, strength_sets

__all__ = [
    "AmgConfig",
    "CfSplitting",
    "C_POINT",
    "F_POINT",
    "Hierarchy",
    "InterpolationError",
    "Level",
    "SmootherBreakdownError",
    "SmootherSpec",
    "SolveStats",
    "StrengthGraph",
    "amg_solve",
    "build_interpolation",
    "cljp_split",
    "galerkin_coarsen",
    "setup_hierarchy",
    "smooth",
    "solve_with_hierarchy",
    "strength_sets",
    "vcycle",
    "work_units",
]
