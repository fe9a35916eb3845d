"""MatrixMarket and plain-text vector I/O for the export surfaces."""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse as sp


def write_matrix_market(path, a: sp.spmatrix, symmetry: str = "general") -> None:
    """Write a sparse matrix in coordinate format with 17 significant digits.

    ``symmetry="symmetric"`` stores the lower triangle with the exact header
    ``%%MatrixMarket matrix coordinate real symmetric``.
    """
    scipy.io.mmwrite(str(path), sp.coo_matrix(a), field="real", precision=16, symmetry=symmetry)


def read_matrix_market(path) -> sp.csr_matrix:
    return sp.csr_matrix(scipy.io.mmread(str(path)))


def write_vector(path, v: np.ndarray) -> None:
    """One value per line, round-trip exact for doubles."""
    with open(path, "w") as fh:
        for x in np.asarray(v, dtype=float):
            fh.write(f"{x:.17g}\n")


def read_vector(path) -> np.ndarray:
    with open(path) as fh:
        return np.array([float(line) for line in fh if line.strip()])
