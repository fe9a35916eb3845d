"""Geometric multigrid V-cycles used as the stand-in for the algebraic
multigrid inner solves of the approximate preconditioner mode.

The package's grids are nested whenever the cell count per side is even, so
prolongation is the exact P1 interpolation between nested spaces (injection
at coincident nodes, edge midpoints averaging their two neighbours along
the edge, cell centres averaging along the split diagonal).  Coarse
operators are Galerkin triple products, which keeps the hierarchy valid for
shifted or locally modified matrices, not just the plain stiffness matrix.

A fixed number of symmetric V-cycles (forward Gauss-Seidel presmoothing,
backward postsmoothing, direct coarsest solve) is a symmetric positive
definite linear operator, as the Krylov methods require of a fixed inner
solve.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu, spsolve_triangular

from .mesh import _boundary_walk


def _node_numbering(N: int) -> np.ndarray:
    """Grid-index -> node-number map for the package's boundary-first order."""
    node_of = np.full((N, N), -1, dtype=np.int64)
    for k, (i, j) in enumerate(_boundary_walk(N)):
        node_of[i, j] = k
    k = 4 * (N - 1)
    for j in range(1, N - 1):
        for i in range(1, N - 1):
            node_of[i, j] = k
            k += 1
    return node_of


def p1_interpolation(N_coarse: int) -> sp.csr_matrix:
    """Prolongation matrix from the N_coarse grid to the 2*(N_coarse-1)+1 grid."""
    N_fine = 2 * (N_coarse - 1) + 1
    fine = _node_numbering(N_fine)
    coarse = _node_numbering(N_coarse)
    rows, cols, vals = [], [], []
    for i in range(N_fine):
        for j in range(N_fine):
            f = fine[i, j]
            if i % 2 == 0 and j % 2 == 0:
                rows.append(f)
                cols.append(coarse[i // 2, j // 2])
                vals.append(1.0)
            elif i % 2 == 1 and j % 2 == 0:
                for ci in ((i - 1) // 2, (i + 1) // 2):
                    rows.append(f)
                    cols.append(coarse[ci, j // 2])
                    vals.append(0.5)
            elif i % 2 == 0 and j % 2 == 1:
                for cj in ((j - 1) // 2, (j + 1) // 2):
                    rows.append(f)
                    cols.append(coarse[i // 2, cj])
                    vals.append(0.5)
            else:
                # cell centre sits on the split diagonal of the coarse cell
                rows.append(f)
                cols.append(coarse[(i - 1) // 2, (j - 1) // 2])
                vals.append(0.5)
                rows.append(f)
                cols.append(coarse[(i + 1) // 2, (j + 1) // 2])
                vals.append(0.5)
    return sp.coo_matrix(
        (vals, (rows, cols)), shape=(N_fine * N_fine, N_coarse * N_coarse)
    ).tocsr()


class _Level:
    def __init__(self, a: sp.csr_matrix):
        self.a = a.tocsr()
        self.lower = sp.tril(a, 0).tocsr()
        self.upper = sp.triu(a, 0).tocsr()

    def smooth_forward(self, x, b):
        return x + spsolve_triangular(self.lower, b - self.a @ x, lower=True)

    def smooth_backward(self, x, b):
        return x + spsolve_triangular(self.upper, b - self.a @ x, lower=False)


class GeometricMultigridSolver:
    """Fixed number of symmetric V-cycles approximating a sparse SPD solve.

    ``grid_side`` is the node count per side of the square grid the matrix
    lives on (the matrix must use the package's node ordering).  Coarsening
    stops when the cell count per side becomes odd or the grid reaches the
    coarse limit; a grid that cannot be coarsened at all is refused with a
    ``ValueError`` so callers can fall back to a plain smoother.
    """

    def __init__(self, a: sp.spmatrix, grid_side: int, cycles: int = 3, coarse_side: int = 5):
        if cycles < 1:
            raise ValueError("cycles must be at least 1")
        if grid_side * grid_side != a.shape[0]:
            raise ValueError(
                f"matrix dim {a.shape[0]} does not match grid side {grid_side}"
            )
        self.cycles = cycles
        self.levels = [_Level(sp.csr_matrix(a))]
        self.transfers = []
        side = grid_side
        while side > coarse_side and (side - 1) % 2 == 0 and (side - 1) // 2 >= 2:
            coarse_side_next = (side - 1) // 2 + 1
            p = p1_interpolation(coarse_side_next)
            coarse_a = (p.T @ self.levels[-1].a @ p).tocsr()
            self.transfers.append(p)
            self.levels.append(_Level(coarse_a))
            side = coarse_side_next
        if not self.transfers:
            raise ValueError(f"grid with side {grid_side} cannot be coarsened")
        self.coarse_lu = splu(sp.csc_matrix(self.levels[-1].a))

    def _vcycle(self, level: int, b: np.ndarray) -> np.ndarray:
        if level == len(self.levels) - 1:
            return self.coarse_lu.solve(b)
        lv = self.levels[level]
        x = lv.smooth_forward(np.zeros_like(b), b)
        p = self.transfers[level]
        coarse_correction = self._vcycle(level + 1, p.T @ (b - lv.a @ x))
        x = x + p @ coarse_correction
        return lv.smooth_backward(x, b)

    def __call__(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        x = self._vcycle(0, rhs)
        for _ in range(self.cycles - 1):
            x = x + self._vcycle(0, rhs - self.levels[0].a @ x)
        return x
