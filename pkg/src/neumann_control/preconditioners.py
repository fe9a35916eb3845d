"""Preconditioners for the permuted extended system and the original KKT system.

Four production preconditioners:

* :class:`BlockTriangularPreconditioner` — the block upper-triangular
  preconditioner for the permuted extended system, applied by two extended
  stiffness solves and one boundary-mass solve (``identity_tail=True``
  degrades the trailing stiffness block to the identity, giving the weaker
  reference variant).
* :class:`DiagonalDroppedSchurPreconditioner` — block diagonal with
  Chebyshev mass solves and the Schur complement approximated by its first
  term only (stiffness * inverse mass * stiffness).
* :class:`DiagonalMatchedSchurPreconditioner` — block diagonal with the
  matched Schur approximation built from the boundary coupling operator.

Inner solve modes: ``exact`` factorizes the extended stiffness matrix (or
the SPD stiffness substitutes) sparsely; ``approx`` replaces every
stiffness-substitute solve by a fixed number of multigrid V-cycles
(symmetric Gauss-Seidel sweeps on grids that do not nest), standing in for
the algebraic multigrid inner solves used at scale.

Dense reference preconditioners with the exactly computed Schur complement
(for the minimal-polynomial termination checks) are provided at desk scale.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

from .assembly import FemOperators
from .sparse_linalg import DENSE_LIMIT, factorize
from .krylov import ChebyshevMassSolver
from .multigrid import GeometricMultigridSolver
from .systems import ExtendedBlocks

INNER_MODES = ("exact", "approx")


def _check_inner(inner: str) -> None:
    if inner not in INNER_MODES:
        raise ValueError(f"inner solve mode must be one of {INNER_MODES}, got {inner!r}")


def build_khat(stiffness: sp.csr_matrix) -> sp.csr_matrix:
    """Nonsingular stiffness substitute: last row and column replaced by the
    identity's.  The leading principal block of the stiffness matrix is
    positive definite, so the result is SPD."""
    n = stiffness.shape[0]
    a = stiffness.tocoo()
    keep = (a.row != n - 1) & (a.col != n - 1)
    rows = np.concatenate([a.row[keep], [n - 1]])
    cols = np.concatenate([a.col[keep], [n - 1]])
    vals = np.concatenate([a.data[keep], [1.0]])
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


class SymmetricGaussSeidelSolver:
    """Fixed number of symmetric Gauss-Seidel sweeps from the zero vector.

    For a symmetric positive definite matrix this defines a symmetric
    positive definite linear approximation of the inverse, which is what the
    Krylov methods require of a stationary inner solve.
    """

    def __init__(self, a: sp.csr_matrix, sweeps: int = 3):
        if sweeps < 1:
            raise ValueError("sweeps must be at least 1")
        if np.any(a.diagonal() <= 0):
            raise ValueError("matrix must have a positive diagonal")
        self.a = a.tocsr()
        self.lower = sp.tril(a, 0).tocsr()
        self.upper = sp.triu(a, 0).tocsr()
        self.sweeps = sweeps

    def __call__(self, rhs: np.ndarray) -> np.ndarray:
        x = spsolve_triangular(self.lower, rhs, lower=True)
        x += spsolve_triangular(self.upper, rhs - self.a @ x, lower=False)
        for _ in range(self.sweeps - 1):
            x += spsolve_triangular(self.lower, rhs - self.a @ x, lower=True)
            x += spsolve_triangular(self.upper, rhs - self.a @ x, lower=False)
        return x


def _grid_side(n: int) -> int:
    side = int(round(np.sqrt(n)))
    if side * side != n:
        raise ValueError(f"node count {n} is not a square grid")
    return side


def approximate_stiffness_solver(matrix: sp.csr_matrix, cycles: int = 3):
    """Fixed SPD approximation of a stiffness-substitute solve.

    Multigrid V-cycles when the grid nests, symmetric Gauss-Seidel sweeps
    otherwise (tiny or non-nesting grids).
    """
    try:
        return GeometricMultigridSolver(matrix, _grid_side(matrix.shape[0]), cycles=cycles)
    except ValueError:
        return SymmetricGaussSeidelSolver(matrix, sweeps=cycles)


class ExtendedStiffnessSolver:
    """Applies an (approximate) inverse of the bordered stiffness matrix.

    ``exact`` factorizes the bordered matrix itself.  ``eliminated`` solves
    the bordered system built on the nonsingular stiffness substitute by
    block elimination: with ``w`` and ``s`` precomputed once from the
    substitute solve applied to the border vector,

        x2 = (v1 . w - v2) / s,    x1 = solve(v1) - x2 * w.

    With an exact substitute solve this inverts the substitute-bordered
    matrix exactly; with a smoother it is the fixed linear operator used in
    the approximate inner mode.
    """

    def __init__(self, apply_fn, n: int, label: str):
        self._apply = apply_fn
        self.n = n
        self.label = label

    @classmethod
    def exact(cls, stiffness_ext: sp.csr_matrix) -> "ExtendedStiffnessSolver":
        lu = factorize(stiffness_ext, "symmetric-indefinite")
        return cls(lu.solve, stiffness_ext.shape[0] - 1, "exact")

    @classmethod
    def eliminated(cls, stiffness: sp.csr_matrix, border: np.ndarray, khat_apply, label: str):
        n = stiffness.shape[0]
        w = khat_apply(border)
        s = float(border @ w)
        if not s > 0:
            raise RuntimeError(
                "degenerate regularization: border weighted solve is not positive"
            )

        def apply_fn(rhs):
            v1, v2 = rhs[:n], rhs[n]
            z = khat_apply(v1)
            x2 = (v1 @ w - v2) / s
            return np.concatenate([z - x2 * w, [x2]])

        return cls(apply_fn, n, label)

    def __call__(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (self.n + 1,):
            raise ValueError(f"rhs must have length {self.n + 1}")
        return self._apply(rhs)


def make_extended_stiffness_solver(
    blocks: ExtendedBlocks, inner: str = "exact", cycles: int = 3
) -> ExtendedStiffnessSolver:
    """Inner solver for the extended stiffness blocks of the preconditioners."""
    _check_inner(inner)
    if inner == "exact":
        return ExtendedStiffnessSolver.exact(blocks.stiffness_ext)
    n = blocks.n
    stiffness = blocks.stiffness_ext[:n, :n].tocsr()
    border = blocks.stiffness_ext[:n, n].toarray().ravel()
    khat = build_khat(stiffness)
    inner_solve = approximate_stiffness_solver(khat, cycles=cycles)
    return ExtendedStiffnessSolver.eliminated(stiffness, border, inner_solve, "approx")


def solve_extended_stiffness(blocks: ExtendedBlocks, rhs: np.ndarray, inner: str = "exact"):
    """One-shot extended stiffness solve (factorizes on every call)."""
    return make_extended_stiffness_solver(blocks, inner)(rhs)


class BlockTriangularPreconditioner:
    """Block upper-triangular preconditioner for the permuted extended system.

    Application is the three-step back substitution: extended stiffness
    solve for the trailing block (or the identity when ``identity_tail``),
    a boundary-mass solve, and the leading extended stiffness solve.  The
    boundary-mass block is always solved exactly by sparse factorization.
    """

    def __init__(
        self,
        blocks: ExtendedBlocks,
        inner: str = "exact",
        identity_tail: bool = False,
        cycles: int = 3,
    ):
        _check_inner(inner)
        self.blocks = blocks
        self.inner = inner
        self.identity_tail = identity_tail
        self.stiffness_solve = make_extended_stiffness_solver(blocks, inner, cycles)
        self.boundary_mass_lu = factorize(blocks.boundary_mass_ext, "general-lu")
        self.dim = 2 * (blocks.n + 1) + blocks.m_b + 1

    def __call__(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if d.shape != (self.dim,):
            raise ValueError(f"vector must have length {self.dim}")
        n1 = self.blocks.n + 1
        mb1 = self.blocks.m_b + 1
        d1, d2, d3 = d[:n1], d[n1 : n1 + mb1], d[n1 + mb1 :]
        coupling = self.blocks.boundary_coupling_ext
        g3 = d3.copy() if self.identity_tail else self.stiffness_solve(d3)
        g2 = self.boundary_mass_lu.solve(d2 + coupling.T @ g3)
        g1 = self.stiffness_solve(d1 + coupling @ g2)
        return np.concatenate([g1, g2, g3])


class DiagonalDroppedSchurPreconditioner:
    """Block diagonal preconditioner for the original KKT system that keeps
    only the first term of the Schur complement.

    Mass blocks are applied through the Chebyshev semi-iteration; the Schur
    block is applied as substitute-solve, mass multiply, substitute-solve.
    Symmetric positive definite by construction, as MINRES requires.
    """

    def __init__(
        self,
        ops: FemOperators,
        beta: float,
        inner: str = "approx",
        cheb_steps: int = 20,
        cycles: int = 3,
    ):
        _check_inner(inner)
        if beta <= 0:
            raise ValueError("beta must be positive")
        self.n, self.m_b = ops.n, ops.m_b
        self.beta = beta
        self.mass = ops.mass
        self.mass_solve = ChebyshevMassSolver(ops.mass, steps=cheb_steps)
        self.boundary_mass_solve = ChebyshevMassSolver(ops.boundary_mass, steps=cheb_steps)
        khat = build_khat(ops.stiffness)
        if inner == "exact":
            self.stiffness_solve = factorize(khat, "general-lu").solve
        else:
            self.stiffness_solve = approximate_stiffness_solver(khat, cycles=cycles)
        self.dim = 2 * self.n + self.m_b

    def __call__(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if d.shape != (self.dim,):
            raise ValueError(f"vector must have length {self.dim}")
        n, m_b = self.n, self.m_b
        y = self.mass_solve(d[:n])
        u = self.boundary_mass_solve(d[n : n + m_b]) / self.beta
        z = self.stiffness_solve(d[n + m_b :])
        p = self.stiffness_solve(self.mass @ z)
        return np.concatenate([y, u, p])


class DiagonalMatchedSchurPreconditioner:
    """Block diagonal preconditioner for the original KKT system with the
    matched Schur approximation.

    The Schur block is (K + sqrt(h/beta) G) D^{-1} (K + sqrt(h/beta) G)
    where G is the boundary coupling Gram operator (assembled with the
    lumped boundary mass inverse so it stays sparse) and D is h times the
    diagonal holding the lumped boundary masses on boundary nodes and h on
    interior nodes.
    """

    def __init__(
        self,
        ops: FemOperators,
        beta: float,
        mesh_size: float,
        inner: str = "approx",
        cheb_steps: int = 20,
        cycles: int = 3,
    ):
        _check_inner(inner)
        if beta <= 0 or mesh_size <= 0:
            raise ValueError("beta and mesh_size must be positive")
        self.n, self.m_b = ops.n, ops.m_b
        self.beta = beta
        self.mass_solve = ChebyshevMassSolver(ops.mass, steps=cheb_steps)
        self.boundary_mass_solve = ChebyshevMassSolver(ops.boundary_mass, steps=cheb_steps)

        lumped_b = ops.lumped_boundary_mass_diag
        inv_lumped = sp.diags(1.0 / lumped_b)
        gram = (ops.boundary_coupling @ inv_lumped @ ops.boundary_coupling.T).tocsr()
        shifted = (ops.stiffness + np.sqrt(mesh_size / beta) * gram).tocsr()
        if inner == "exact":
            self.shifted_solve = factorize(shifted, "general-lu").solve
        else:
            self.shifted_solve = approximate_stiffness_solver(shifted, cycles=cycles)
        mhat_diag = np.full(self.n, mesh_size)
        mhat_diag[: self.m_b] = lumped_b
        self.mid_diag = mesh_size * mhat_diag
        self.gram = gram
        self.dim = 2 * self.n + self.m_b

    def __call__(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if d.shape != (self.dim,):
            raise ValueError(f"vector must have length {self.dim}")
        n, m_b = self.n, self.m_b
        y = self.mass_solve(d[:n])
        u = self.boundary_mass_solve(d[n : n + m_b]) / self.beta
        z = self.shifted_solve(d[n + m_b :])
        p = self.shifted_solve(self.mid_diag * z)
        return np.concatenate([y, u, p])


def dense_triangular_optimal(blocks: ExtendedBlocks):
    """Block triangular preconditioner for the permuted system with the
    exactly computed Schur complement (dense, desk scale only).

    The preconditioned matrix has a degree-2 minimal polynomial, so GMRES
    terminates in two iterations up to rounding.
    """
    n, m_b = blocks.n, blocks.m_b
    if n + 1 > DENSE_LIMIT:
        raise ValueError(f"dense reference preconditioner refused for n={n}")
    ke = blocks.stiffness_ext.toarray()
    nbe = blocks.boundary_coupling_ext.toarray()
    ze = blocks.mean_coupling.toarray()
    me = blocks.mass_ext.toarray()
    mbe = blocks.boundary_mass_ext.toarray()
    ke_inv_nbe = sla.solve(ke, nbe)
    schur = np.block(
        [
            [mbe + ze.T @ ke_inv_nbe, -nbe.T],
            [ze + me @ ke_inv_nbe, ke],
        ]
    )
    schur_lu = sla.lu_factor(schur)
    ke_lu = sla.lu_factor(ke)

    def apply(d):
        d = np.asarray(d, dtype=float)
        g2 = sla.lu_solve(schur_lu, d[n + 1 :])
        g1 = sla.lu_solve(ke_lu, d[: n + 1] + nbe @ g2[: m_b + 1])
        return np.concatenate([g1, g2])

    return apply


def dense_block_diagonal_optimal(ops: FemOperators, beta: float):
    """Block diagonal preconditioner for the original KKT system with the
    exactly computed (negated) Schur complement (dense, desk scale only).

    Symmetric positive definite; MINRES terminates within four iterations
    by the minimal polynomial of the preconditioned matrix.
    """
    n = ops.n
    if n > DENSE_LIMIT:
        raise ValueError(f"dense reference preconditioner refused for n={n}")
    mass = ops.mass.toarray()
    bmass = ops.boundary_mass.toarray()
    stiff = ops.stiffness.toarray()
    coup = ops.boundary_coupling.toarray()
    neg_schur = stiff @ sla.solve(mass, stiff) + (coup @ sla.solve(bmass, coup.T)) / beta
    mass_ch = sla.cho_factor(mass)
    bmass_ch = sla.cho_factor(bmass)
    schur_ch = sla.cho_factor(neg_schur)

    def apply(d):
        d = np.asarray(d, dtype=float)
        y = sla.cho_solve(mass_ch, d[:n])
        u = sla.cho_solve(bmass_ch, d[n : n + ops.m_b]) / beta
        p = sla.cho_solve(schur_ch, d[n + ops.m_b :])
        return np.concatenate([y, u, p])

    return apply
