"""Uniform triangulation of the unit square with boundary-first node ordering.

The grid has ``N`` nodes per side (mesh size ``h = 1/(N-1)``) and every cell
is split into two triangles along the lower-left to upper-right diagonal.
Nodes are numbered so that all boundary nodes come first, walking the
boundary counterclockwise from the origin; interior nodes follow row by row.
This ordering is what gives the boundary coupling operators their clean
two-block structure, so it is built into the mesh rather than applied as a
permutation afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TriMesh:
    """Triangulation of (0,1)^2 with boundary nodes listed first.

    Attributes
    ----------
    grid_side : int
        Number of nodes per side (N >= 2).
    mesh_size : float
        Grid spacing h = 1/(N-1).
    node_coords : ndarray, shape (n, 2)
        Node coordinates; rows 0..m_B-1 are the boundary nodes in
        counterclockwise order starting at (0, 0).
    triangles : ndarray, shape (2*(N-1)**2, 3)
        Vertex indices, all positively oriented (signed area h^2/2).
    boundary_nodes : ndarray, shape (m_B,)
        Indices of the boundary nodes (0..m_B-1 by construction).
    """

    grid_side: int
    mesh_size: float
    node_coords: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray

    @property
    def n(self) -> int:
        """Total node count N^2."""
        return self.node_coords.shape[0]

    @property
    def m_b(self) -> int:
        """Boundary node count 4*(N-1)."""
        return self.boundary_nodes.shape[0]

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.arange(self.m_b, self.n)

    def summary(self) -> dict:
        """JSON-ready mesh summary for harness reports."""
        return {
            "grid_side": self.grid_side,
            "mesh_size": self.mesh_size,
            "nodes": self.n,
            "boundary_nodes": self.m_b,
            "triangles": int(self.triangles.shape[0]),
            "kkt_dim": 2 * self.n + self.m_b,
        }


def _boundary_walk(N: int) -> list[tuple[int, int]]:
    """Grid indices (i, j) of the boundary, counterclockwise from (0, 0)."""
    bottom = [(i, 0) for i in range(N - 1)]
    right = [(N - 1, j) for j in range(N - 1)]
    top = [(i, N - 1) for i in range(N - 1, 0, -1)]
    left = [(0, j) for j in range(N - 1, 0, -1)]
    return bottom + right + top + left


def build_mesh(N: int) -> TriMesh:
    """Build the uniform right-triangle mesh with N nodes per side.

    Raises
    ------
    ValueError
        If ``N < 2``.
    """
    if N < 2:
        raise ValueError(f"grid side must be at least 2, got {N}")

    h = 1.0 / (N - 1)
    m_b = 4 * (N - 1)
    n = N * N

    # grid index (i, j) -> global node number, boundary first
    node_of = np.full((N, N), -1, dtype=np.int64)
    for k, (i, j) in enumerate(_boundary_walk(N)):
        node_of[i, j] = k
    k = m_b
    for j in range(1, N - 1):
        for i in range(1, N - 1):
            node_of[i, j] = k
            k += 1

    coords = np.empty((n, 2), dtype=np.float64)
    ii, jj = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    coords[node_of.ravel(), 0] = (ii.ravel()) * h
    coords[node_of.ravel(), 1] = (jj.ravel()) * h

    # two triangles per cell, split along the lower-left/upper-right diagonal
    tris = np.empty((2 * (N - 1) ** 2, 3), dtype=np.int64)
    t = 0
    for j in range(N - 1):
        for i in range(N - 1):
            ll = node_of[i, j]
            lr = node_of[i + 1, j]
            ul = node_of[i, j + 1]
            ur = node_of[i + 1, j + 1]
            tris[t] = (ll, lr, ur)
            tris[t + 1] = (ll, ur, ul)
            t += 2

    boundary = np.arange(m_b, dtype=np.int64)
    for arr in (coords, tris, boundary):
        arr.setflags(write=False)
    return TriMesh(
        grid_side=N,
        mesh_size=h,
        node_coords=coords,
        triangles=tris,
        boundary_nodes=boundary,
    )


def signed_areas(mesh: TriMesh) -> np.ndarray:
    """Signed area of every triangle (positive for the standard orientation)."""
    p = mesh.node_coords[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
