"""Preconditioned Krylov solvers for the pure Neumann boundary control problem."""

from .mesh import TriMesh, build_mesh
from .assembly import (
    FemOperators,
    ProblemInstance,
    assemble_operators,
    example_problem,
    load_vector,
)
from .systems import (
    BlockOperator,
    BlockSystem,
    ExtendedBlocks,
    build_extended,
    build_extended_permuted,
    build_original_kkt,
    recover_solution,
    solve_regularized_neumann,
)
from .krylov import ChebyshevMassSolver, SolveReport, gmres, minres
from .preconditioners import (
    BlockTriangularPreconditioner,
    DiagonalDroppedSchurPreconditioner,
    DiagonalMatchedSchurPreconditioner,
)

__all__ = [
    "TriMesh",
    "build_mesh",
    "FemOperators",
    "ProblemInstance",
    "assemble_operators",
    "example_problem",
    "load_vector",
    "BlockOperator",
    "BlockSystem",
    "ExtendedBlocks",
    "build_extended",
    "build_extended_permuted",
    "build_original_kkt",
    "recover_solution",
    "solve_regularized_neumann",
    "ChebyshevMassSolver",
    "SolveReport",
    "gmres",
    "minres",
    "BlockTriangularPreconditioner",
    "DiagonalDroppedSchurPreconditioner",
    "DiagonalMatchedSchurPreconditioner",
]

__version__ = "0.1.0"
