"""P1 finite element operators for the boundary control problem.

Assembles, for a :class:`~neumann_control.mesh.TriMesh`:

* the mass matrix ``M`` and stiffness matrix ``K`` over the domain,
* the boundary mass matrix ``M_b`` over the 1D boundary basis,
* the coupling matrix ``N_b`` between domain and boundary bases,
* the basis-integral vector (row sums of ``M``) and the load vectors for the
  desired state and the source term.

Volume integrals use the three-point edge-midpoint rule, which is exact for
quadratic integrands, hence exact for every mass/stiffness entry.  Boundary
integrals of products of the 1D hat functions are done in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import TriMesh

#: reference P1 mass matrix scaled by (area/12)
_MASS_PATTERN = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]])

#: reference 1D segment mass matrix scaled by (length/6)
_EDGE_PATTERN = np.array([[2.0, 1.0], [1.0, 2.0]])


@dataclass(frozen=True)
class ProblemInstance:
    """Data of one control problem: targets, source, and regularization weight."""

    desired_state: Callable[[np.ndarray, np.ndarray], np.ndarray]
    source: Callable[[np.ndarray, np.ndarray], np.ndarray]
    beta: float

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError(f"regularization parameter must be positive, got {self.beta}")


def _quarter_square_indicator(x, y):
    # closed quadrant: points on the interface lines count as inside
    return np.where((x <= 0.5) & (y <= 0.5), 1.0, 0.0)


def _quarter_square_polynomial(x, y):
    return np.where(
        (x <= 0.5) & (y <= 0.5),
        (2.0 * x - 1.0) ** 2 * (2.0 * y - 1.0) ** 2,
        0.0,
    )


def zero_source(x, y):
    return np.zeros_like(np.asarray(x, dtype=float))


def example_problem(example: int, beta: float) -> ProblemInstance:
    """The two shipped benchmark problems (both with zero source term).

    Example 1 tracks the indicator of the quarter square ``x, y <= 1/2``;
    example 2 tracks the bump ``(2x-1)^2 (2y-1)^2`` on the same quadrant.
    """
    if example == 1:
        return ProblemInstance(_quarter_square_indicator, zero_source, beta)
    if example == 2:
        return ProblemInstance(_quarter_square_polynomial, zero_source, beta)
    raise ValueError(f"unknown example {example}; choose 1 or 2")


@dataclass(frozen=True)
class FemOperators:
    """Assembled operators and load vectors for one problem instance.

    ``basis_integrals`` holds the integrals of the nodal basis functions,
    which equal the row sums of the mass matrix; it doubles as the row-sum
    lumped mass diagonal.
    """

    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    boundary_mass: sp.csr_matrix
    boundary_coupling: sp.csr_matrix
    basis_integrals: np.ndarray
    target_load: np.ndarray
    source_load: np.ndarray

    @property
    def n(self) -> int:
        return self.mass.shape[0]

    @property
    def m_b(self) -> int:
        return self.boundary_mass.shape[0]

    @property
    def lumped_mass_diag(self) -> np.ndarray:
        return self.basis_integrals

    @property
    def lumped_boundary_mass_diag(self) -> np.ndarray:
        return np.asarray(self.boundary_mass.sum(axis=1)).ravel()


def element_stiffness(coords: np.ndarray) -> np.ndarray:
    """P1 stiffness matrix of one triangle given its 3x2 vertex coordinates."""
    x, y = coords[:, 0], coords[:, 1]
    b = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]])
    c = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]])
    area = 0.5 * (b[0] * c[1] - b[1] * c[0])
    if area <= 0:
        raise ValueError("triangle is degenerate or negatively oriented")
    return (np.outer(b, b) + np.outer(c, c)) / (4.0 * area)


def element_mass(coords: np.ndarray) -> np.ndarray:
    """P1 mass matrix of one triangle given its 3x2 vertex coordinates."""
    x, y = coords[:, 0], coords[:, 1]
    area = 0.5 * ((x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]))
    if area <= 0:
        raise ValueError("triangle is degenerate or negatively oriented")
    return (area / 12.0) * _MASS_PATTERN


def _symmetrize(a: sp.csr_matrix) -> sp.csr_matrix:
    # exact: averages each entry with its transpose partner
    return ((a + a.T) * 0.5).tocsr()


def assemble_operators(mesh: TriMesh, problem: ProblemInstance) -> FemOperators:
    """Assemble all operators and load vectors for ``problem`` on ``mesh``."""
    n = mesh.n
    m_b = mesh.m_b
    tris = mesh.triangles
    p = mesh.node_coords[tris]  # (T, 3, 2)

    bvec = np.stack(
        [p[:, 1, 1] - p[:, 2, 1], p[:, 2, 1] - p[:, 0, 1], p[:, 0, 1] - p[:, 1, 1]],
        axis=1,
    )
    cvec = np.stack(
        [p[:, 2, 0] - p[:, 1, 0], p[:, 0, 0] - p[:, 2, 0], p[:, 1, 0] - p[:, 0, 0]],
        axis=1,
    )
    area = 0.5 * (bvec[:, 0] * cvec[:, 1] - bvec[:, 1] * cvec[:, 0])

    k_loc = (bvec[:, :, None] * bvec[:, None, :] + cvec[:, :, None] * cvec[:, None, :]) / (
        4.0 * area[:, None, None]
    )
    m_loc = (area[:, None, None] / 12.0) * _MASS_PATTERN

    rows = tris[:, [0, 0, 0, 1, 1, 1, 2, 2, 2]].ravel()
    cols = tris[:, [0, 1, 2, 0, 1, 2, 0, 1, 2]].ravel()
    stiffness = sp.coo_matrix((k_loc.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    mass = sp.coo_matrix((m_loc.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    stiffness = _symmetrize(stiffness)
    mass = _symmetrize(mass)

    # boundary edges connect consecutive boundary nodes along the walk;
    # the boundary basis function with index j is the trace of the nodal
    # basis of boundary node j, so N_b shares the edge contributions of M_b
    h = mesh.mesh_size
    edge_lo = np.arange(m_b)
    edge_hi = (edge_lo + 1) % m_b
    erow = np.concatenate([edge_lo, edge_lo, edge_hi, edge_hi])
    ecol = np.concatenate([edge_lo, edge_hi, edge_lo, edge_hi])
    eval_ = np.concatenate(
        [
            np.full(m_b, 2.0 * h / 6.0),
            np.full(m_b, h / 6.0),
            np.full(m_b, h / 6.0),
            np.full(m_b, 2.0 * h / 6.0),
        ]
    )
    boundary_mass = sp.coo_matrix((eval_, (erow, ecol)), shape=(m_b, m_b)).tocsr()
    boundary_mass = _symmetrize(boundary_mass)
    # boundary node j has global index j, interior rows are empty
    boundary_coupling = sp.coo_matrix((eval_, (erow, ecol)), shape=(n, m_b)).tocsr()

    basis_integrals = mass @ np.ones(n)
    target_load = load_vector(mesh, problem.desired_state)
    source_load = load_vector(mesh, problem.source)

    return FemOperators(
        mass=mass,
        stiffness=stiffness,
        boundary_mass=boundary_mass,
        boundary_coupling=boundary_coupling,
        basis_integrals=basis_integrals,
        target_load=target_load,
        source_load=source_load,
    )


def load_vector(mesh: TriMesh, g: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """Load vector with entries approximating the integrals of ``g`` against
    each nodal basis function, by the centroid rule per triangle.

    Each triangle contributes a third of its area times the centroid value
    to each vertex.  Centroids never fall on mesh lines, so a target that is
    piecewise constant on mesh-aligned regions is integrated exactly, and
    smooth targets are integrated with O(h^2) consistency.  ``g`` must
    accept numpy arrays of x and y coordinates.
    """
    tris = mesh.triangles
    p = mesh.node_coords[tris]  # (T, 3, 2)
    area = 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )
    centroid = p.mean(axis=1)
    gval = np.asarray(g(centroid[:, 0], centroid[:, 1]), dtype=float)
    if gval.shape != centroid[:, 0].shape:
        raise ValueError("integrand must return one value per evaluation point")
    contrib = np.repeat((area * gval / 3.0)[:, None], 3, axis=1)
    out = np.zeros(mesh.n)
    np.add.at(out, tris.ravel(), contrib.ravel())
    return out
