"""Saddle point systems for the boundary control problem.

Three forms are built from the assembled operators:

* the original KKT system of the discretized problem (singular stiffness
  block, dimension ``2n + m_B``),
* the extended system obtained by regularizing the pure Neumann operator
  with the zero-mean constraint (dimension ``2n + m_B + 3``, symmetric,
  nonsingular),
* its row-permuted form with the nonsingular extended stiffness matrix in
  the leading block, which is what the triangular preconditioner targets.

The permuted system shares the extended system's block objects; only the
block-row order differs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import FemOperators
from .sparse_linalg import factorize


class BlockOperator:
    """Matrix-free operator assembled from a grid of sparse blocks.

    ``blocks[i][j]`` is a sparse matrix or ``None`` (zero block).  The
    operator applies matrix-vector products block by block, so permuted
    variants can share the underlying matrices.
    """

    def __init__(self, blocks):
        self.blocks = blocks
        self.row_dims = []
        for i, row in enumerate(blocks):
            dims = {blk.shape[0] for blk in row if blk is not None}
            if len(dims) != 1:
                raise ValueError(f"inconsistent row dimensions in block row {i}")
            self.row_dims.append(dims.pop())
        ncols = len(blocks[0])
        self.col_dims = []
        for j in range(ncols):
            dims = {row[j].shape[1] for row in blocks if row[j] is not None}
            if len(dims) != 1:
                raise ValueError(f"inconsistent column dimensions in block column {j}")
            self.col_dims.append(dims.pop())
        self.shape = (sum(self.row_dims), sum(self.col_dims))

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.shape[1],):
            raise ValueError(f"operator is {self.shape}, vector has shape {x.shape}")
        splits = np.cumsum(self.col_dims)[:-1]
        parts = np.split(x, splits)
        out = np.zeros(self.shape[0])
        offset = 0
        for row, dim in zip(self.blocks, self.row_dims):
            seg = out[offset : offset + dim]
            for blk, part in zip(row, parts):
                if blk is not None:
                    seg += blk @ part
            offset += dim
        return out

    __call__ = matvec

    def to_sparse(self) -> sp.csr_matrix:
        return sp.bmat(self.blocks, format="csr")


@dataclass(frozen=True)
class BlockSystem:
    """One of the three system forms, with named index ranges per variable."""

    kind: str  # "original" | "extended" | "permuted"
    total_dim: int
    layout: dict
    operator: BlockOperator
    rhs: np.ndarray

    def part(self, x: np.ndarray, name: str) -> np.ndarray:
        lo, hi = self.layout[name]
        return x[lo:hi]

    def layout_json(self) -> dict:
        return {name: [int(lo), int(hi)] for name, (lo, hi) in self.layout.items()}


@dataclass(frozen=True)
class ExtendedBlocks:
    """Blocks of the extended system.

    ``stiffness_ext`` is the stiffness matrix bordered with the basis
    integrals (nonsingular); ``mean_coupling`` carries those integrals into
    the shift equation; ``boundary_mass_ext`` is the regularized boundary
    mass extended by the trivial scalar block.
    """

    stiffness_ext: sp.csr_matrix  # (n+1) x (n+1)
    mass_ext: sp.csr_matrix  # (n+1) x (n+1)
    mean_coupling: sp.csr_matrix  # (n+1) x (m_B+1)
    boundary_mass_ext: sp.csr_matrix  # (m_B+1) x (m_B+1)
    boundary_coupling_ext: sp.csr_matrix  # (n+1) x (m_B+1)
    beta: float

    @property
    def n(self) -> int:
        return self.stiffness_ext.shape[0] - 1

    @property
    def m_b(self) -> int:
        return self.boundary_mass_ext.shape[0] - 1


def _original_layout(n: int, m_b: int) -> dict:
    return {
        "state": (0, n),
        "control": (n, n + m_b),
        "adjoint": (n + m_b, 2 * n + m_b),
    }


def _extended_layout(n: int, m_b: int) -> dict:
    return {
        "state": (0, n),
        "state_multiplier": (n, n + 1),
        "control": (n + 1, n + 1 + m_b),
        "shift": (n + 1 + m_b, n + 2 + m_b),
        "adjoint": (n + 2 + m_b, 2 * n + 2 + m_b),
        "adjoint_multiplier": (2 * n + 2 + m_b, 2 * n + 3 + m_b),
    }


def build_original_kkt(ops: FemOperators, beta: float) -> BlockSystem:
    """First order optimality system of the unregularized problem."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    n, m_b = ops.n, ops.m_b
    neg_nb = (-ops.boundary_coupling).tocsr()
    neg_nbt = neg_nb.T.tocsr()
    operator = BlockOperator(
        [
            [ops.mass, None, ops.stiffness],
            [None, (beta * ops.boundary_mass).tocsr(), neg_nbt],
            [ops.stiffness, neg_nb, None],
        ]
    )
    rhs = np.concatenate([ops.target_load, np.zeros(m_b), ops.source_load])
    return BlockSystem(
        kind="original",
        total_dim=2 * n + m_b,
        layout=_original_layout(n, m_b),
        operator=operator,
        rhs=rhs,
    )


def make_extended_blocks(ops: FemOperators, beta: float) -> ExtendedBlocks:
    if beta <= 0:
        raise ValueError("beta must be positive")
    n, m_b = ops.n, ops.m_b
    w = ops.basis_integrals

    wcol = sp.csr_matrix((w, (np.arange(n), np.zeros(n, dtype=np.int64))), shape=(n, 1))
    stiffness_ext = sp.bmat([[ops.stiffness, wcol], [wcol.T, None]], format="csr")
    mass_ext = sp.bmat(
        [[ops.mass, None], [None, sp.csr_matrix((1, 1))]], format="csr"
    )
    mean_coupling = sp.csr_matrix(
        (w, (np.arange(n), np.full(n, m_b, dtype=np.int64))), shape=(n + 1, m_b + 1)
    )
    scalar_block = sp.csr_matrix(([w.sum()], ([0], [0])), shape=(1, 1))
    boundary_mass_ext = sp.bmat(
        [[(beta * ops.boundary_mass).tocsr(), None], [None, scalar_block]], format="csr"
    )
    boundary_coupling_ext = sp.bmat(
        [[ops.boundary_coupling, None], [None, sp.csr_matrix((1, 1))]], format="csr"
    )
    return ExtendedBlocks(
        stiffness_ext=stiffness_ext,
        mass_ext=mass_ext,
        mean_coupling=mean_coupling,
        boundary_mass_ext=boundary_mass_ext,
        boundary_coupling_ext=boundary_coupling_ext,
        beta=beta,
    )


def _extended_rhs_parts(ops: FemOperators):
    target_ext = np.concatenate([ops.target_load, [0.0]])
    mean_rhs = np.concatenate([np.zeros(ops.m_b), [ops.target_load.sum()]])
    source_ext = np.concatenate([ops.source_load, [0.0]])
    return target_ext, mean_rhs, source_ext


def build_extended(ops: FemOperators, beta: float) -> tuple[BlockSystem, ExtendedBlocks]:
    """Symmetric extended system (before row permutation)."""
    blocks = make_extended_blocks(ops, beta)
    neg_nbe = (-blocks.boundary_coupling_ext).tocsr()
    neg_nbet = neg_nbe.T.tocsr()
    operator = BlockOperator(
        [
            [blocks.mass_ext, blocks.mean_coupling, blocks.stiffness_ext],
            [blocks.mean_coupling.T.tocsr(), blocks.boundary_mass_ext, neg_nbet],
            [blocks.stiffness_ext, neg_nbe, None],
        ]
    )
    target_ext, mean_rhs, source_ext = _extended_rhs_parts(ops)
    rhs = np.concatenate([target_ext, mean_rhs, source_ext])
    n, m_b = ops.n, ops.m_b
    system = BlockSystem(
        kind="extended",
        total_dim=2 * n + m_b + 3,
        layout=_extended_layout(n, m_b),
        operator=operator,
        rhs=rhs,
    )
    return system, blocks


def build_extended_permuted(ops: FemOperators, beta: float) -> tuple[BlockSystem, ExtendedBlocks]:
    """Extended system with block rows reordered (third, second, first).

    The row permutation moves the nonsingular extended stiffness matrix to
    the leading block; unknown ordering, and hence the layout, is unchanged.
    """
    blocks = make_extended_blocks(ops, beta)
    neg_nbe = (-blocks.boundary_coupling_ext).tocsr()
    neg_nbet = neg_nbe.T.tocsr()
    operator = BlockOperator(
        [
            [blocks.stiffness_ext, neg_nbe, None],
            [blocks.mean_coupling.T.tocsr(), blocks.boundary_mass_ext, neg_nbet],
            [blocks.mass_ext, blocks.mean_coupling, blocks.stiffness_ext],
        ]
    )
    target_ext, mean_rhs, source_ext = _extended_rhs_parts(ops)
    rhs = np.concatenate([source_ext, mean_rhs, target_ext])
    n, m_b = ops.n, ops.m_b
    system = BlockSystem(
        kind="permuted",
        total_dim=2 * n + m_b + 3,
        layout=_extended_layout(n, m_b),
        operator=operator,
        rhs=rhs,
    )
    return system, blocks


def solve_regularized_neumann(ops: FemOperators, control: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve the zero-mean regularized Neumann problem for a given control.

    Returns the zero-mean state and the scalar multiplier, which equals the
    compatibility defect of the data (zero for compatible source/control).
    """
    control = np.asarray(control, dtype=float)
    if control.shape != (ops.m_b,):
        raise ValueError(f"control must have length {ops.m_b}")
    n = ops.n
    w = ops.basis_integrals
    wcol = sp.csr_matrix((w, (np.arange(n), np.zeros(n, dtype=np.int64))), shape=(n, 1))
    bordered = sp.bmat([[ops.stiffness, wcol], [wcol.T, None]], format="csr")
    rhs = np.concatenate([ops.source_load + ops.boundary_coupling @ control, [0.0]])
    sol = factorize(bordered, "symmetric-indefinite").solve(rhs)
    return sol[:n], float(sol[n])


def recover_solution(system: BlockSystem, solution: np.ndarray):
    """Recover the physical triple (state, control, adjoint) from an
    extended/permuted solution vector by adding the constant shift back."""
    if system.kind not in ("extended", "permuted"):
        raise ValueError("recovery applies to the extended system forms")
    y0 = system.part(solution, "state")
    shift = system.part(solution, "shift")[0]
    u = system.part(solution, "control")
    p = system.part(solution, "adjoint")
    return y0 + shift, u.copy(), p.copy()
