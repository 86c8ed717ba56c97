"""Quadratic-energy structured prediction on pixel lattices.

Exact MAP inference for Gaussian CRFs posed as quadratic optimization:
one sparse linear solve for the forward pass, linear solves and sparse
outer products for the parameter gradients, a shared-coupling fast path,
coupled multi-resolution systems, and a toy end-to-end trainer.
"""

from .grid import GridGraph, ScoreField, grid_edges
from .sparse import (
    SparseSym,
    add_scaled_identity,
    assemble,
    build_pattern,
    gershgorin_margin,
    load_system,
    load_vector,
    offdiag_apply,
    pattern_from_edges,
    save_system,
    save_vector,
    spmv,
    symmetrize_values,
)
from .solvers import (
    BreakdownError,
    NotConvergedError,
    SolveReport,
    SolverConfig,
    SolverError,
    ZeroDiagonalError,
    gauss_seidel_step,
    jacobi_step,
    meanfield_update,
    solve,
)

__all__ = [
    "GridGraph", "ScoreField", "grid_edges",
    "SparseSym", "assemble", "build_pattern", "pattern_from_edges",
    "spmv", "offdiag_apply", "add_scaled_identity", "gershgorin_margin",
    "symmetrize_values", "save_system", "load_system", "save_vector", "load_vector",
    "SolverConfig", "SolveReport", "solve",
    "jacobi_step", "gauss_seidel_step", "meanfield_update",
    "SolverError", "ZeroDiagonalError", "BreakdownError", "NotConvergedError",
]

__version__ = "0.1.0"
