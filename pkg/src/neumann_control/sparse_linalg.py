"""Sparse kernels and direct factorizations shared by all modules.

Matrices are scipy CSR/CSC; factorizations delegate to SuperLU (general LU
with partial pivoting and COLAMD fill-reducing ordering) and, for symmetric
positive definite matrices at desk scale, to a dense Cholesky whose pivot
breakdown doubles as the SPD test used elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

#: largest dimension handled by the dense fallback paths
DENSE_LIMIT = 2000


class DefinitenessError(ValueError):
    """Raised when a Cholesky factorization of a claimed-SPD matrix breaks down."""


def validate_csr(a: sp.csr_matrix) -> None:
    """Check the CSR structural invariants; raises ValueError on violation."""
    if not sp.issparse(a) or a.format != "csr":
        raise ValueError("expected a CSR matrix")
    nrows = a.shape[0]
    indptr, indices = a.indptr, a.indices
    if len(indptr) != nrows + 1 or indptr[0] != 0 or indptr[-1] != a.nnz:
        raise ValueError("malformed row pointer array")
    if np.any(np.diff(indptr) < 0):
        raise ValueError("row pointers must be monotone")
    for r in range(nrows):
        row = indices[indptr[r] : indptr[r + 1]]
        if row.size and (np.any(np.diff(row) <= 0) or row[-1] >= a.shape[1]):
            raise ValueError(f"row {r}: column indices not strictly increasing in range")
    if np.any(np.isnan(a.data)):
        raise ValueError("stored values contain NaN")


def spmv(a: sp.spmatrix, x: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product with an explicit dimension check."""
    x = np.asarray(x)
    if x.shape != (a.shape[1],):
        raise ValueError(f"dimension mismatch: matrix is {a.shape}, vector has shape {x.shape}")
    return a @ x


@dataclass
class Factorization:
    """Opaque handle to a factorized square matrix."""

    kind: str
    dim: int
    _handle: Any = field(repr=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return solve_factored(self, rhs)


def factorize(a: sp.spmatrix | np.ndarray, kind: str = "general-lu") -> Factorization:
    """Factorize a square matrix.

    ``kind`` is one of ``general-lu`` (SuperLU, also the baseline for
    symmetric indefinite systems), ``symmetric-indefinite`` (alias of the
    LU baseline), or ``cholesky`` (dense, dim <= DENSE_LIMIT; raises
    :class:`DefinitenessError` if the matrix is not positive definite).
    """
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got {a.shape}")
    dim = a.shape[0]
    if kind in ("general-lu", "symmetric-indefinite"):
        mat = sp.csc_matrix(a)
        return Factorization(kind=kind, dim=dim, _handle=spla.splu(mat))
    if kind == "cholesky":
        if dim > DENSE_LIMIT:
            raise ValueError(
                f"cholesky kind is a dense desk-scale path (dim <= {DENSE_LIMIT}), got {dim}; "
                "use general-lu for large SPD systems"
            )
        dense = a.toarray() if sp.issparse(a) else np.asarray(a, dtype=float)
        try:
            c, lower = sla.cho_factor(dense)
        except sla.LinAlgError as err:
            raise DefinitenessError(f"matrix is not positive definite: {err}") from err
        return Factorization(kind=kind, dim=dim, _handle=(c, lower))
    raise ValueError(f"unknown factorization kind {kind!r}")


def solve_factored(f: Factorization, rhs: np.ndarray) -> np.ndarray:
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != f.dim:
        raise ValueError(f"dimension mismatch: factorization dim {f.dim}, rhs {rhs.shape}")
    if f.kind == "cholesky":
        return sla.cho_solve(f._handle, rhs)
    return f._handle.solve(rhs)


def dense_solve(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Dense direct solve for the desk-scale verification paths."""
    if a.shape[0] > DENSE_LIMIT:
        raise ValueError(f"dense path refused for dim {a.shape[0]} > {DENSE_LIMIT}")
    return sla.solve(a, rhs)
