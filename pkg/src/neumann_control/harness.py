"""Experiment harness: single solves, sweep tables, spectral sweeps, exports.

This is the layer behind the command line.  It assembles the configured
problem, picks the matching system/preconditioner/solver combination, and
writes the reports and tables that mirror the benchmark layout: one CSV per
regularization value with rows per problem size and ``iterations(seconds)``
cells, a dash when the iteration cap is hit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from . import mmio
from .assembly import ProblemInstance, assemble_operators, example_problem
from .krylov import SolveReport, gmres, minres
from .mesh import build_mesh
from .preconditioners import (
    BlockTriangularPreconditioner,
    DiagonalDroppedSchurPreconditioner,
    DiagonalMatchedSchurPreconditioner,
)
from .spectral import bound_fit, spectral_report
from .sparse_linalg import DENSE_LIMIT
from .systems import (
    build_extended_permuted,
    build_original_kkt,
    make_extended_blocks,
    recover_solution,
)


class ConfigurationError(ValueError):
    """Invalid or incompatible run configuration."""


#: solver implied by each preconditioner
METHOD_SOLVERS = {
    "phat2": "gmres",
    "phatI": "gmres",
    "rees": "minres",
    "pearson": "minres",
}


@dataclass
class RunConfig:
    """One solve: problem, discretization, method, and solver settings."""

    example: int = 1
    grid_side: int = 33
    beta: float = 1e-2
    preconditioner: str = "phat2"
    solver: str | None = None
    inner: str = "exact"
    tol: float = 1e-6
    maxit: int = 500
    cheb_steps: int = 20
    cycles: int = 3
    seed: int = 0
    out_dir: str | None = None
    write_solution: bool = False

    def validate(self) -> None:
        if self.example not in (1, 2):
            raise ConfigurationError(
                f"unknown example {self.example}; pass 1 or 2 (custom problems go "
                "through the library API)"
            )
        if self.grid_side < 2:
            raise ConfigurationError("grid side must be at least 2")
        if self.beta <= 0:
            raise ConfigurationError("beta must be positive")
        if self.preconditioner not in METHOD_SOLVERS:
            raise ConfigurationError(
                f"unknown preconditioner {self.preconditioner!r}; "
                f"choose from {sorted(METHOD_SOLVERS)}"
            )
        if self.inner not in ("exact", "approx"):
            raise ConfigurationError("inner mode must be 'exact' or 'approx'")
        required = METHOD_SOLVERS[self.preconditioner]
        if self.solver is not None and self.solver != required:
            raise ConfigurationError(
                f"{self.preconditioner} runs with {required} "
                f"({'permuted extended' if required == 'gmres' else 'original symmetric'} "
                f"system), not {self.solver}"
            )
        if self.tol <= 0 or self.maxit < 1:
            raise ConfigurationError("tol must be positive and maxit at least 1")

    @property
    def effective_solver(self) -> str:
        return METHOD_SOLVERS[self.preconditioner]


def _solve_configured(config: RunConfig, problem: ProblemInstance):
    """Assemble and solve one configured run; shared by solve and sweep."""
    mesh = build_mesh(config.grid_side)
    ops = assemble_operators(mesh, problem)
    if config.effective_solver == "gmres":
        system, blocks = build_extended_permuted(ops, config.beta)
        precond = BlockTriangularPreconditioner(
            blocks,
            inner=config.inner,
            identity_tail=(config.preconditioner == "phatI"),
            cycles=config.cycles,
        )
        x, report = gmres(
            system.operator,
            system.rhs,
            preconditioner=precond,
            tol=config.tol,
            maxit=config.maxit,
        )
        y, u, p = recover_solution(system, x)
    else:
        system = build_original_kkt(ops, config.beta)
        if config.preconditioner == "rees":
            precond = DiagonalDroppedSchurPreconditioner(
                ops,
                config.beta,
                inner=config.inner,
                cheb_steps=config.cheb_steps,
                cycles=config.cycles,
            )
        else:
            precond = DiagonalMatchedSchurPreconditioner(
                ops,
                config.beta,
                mesh.mesh_size,
                inner=config.inner,
                cheb_steps=config.cheb_steps,
                cycles=config.cycles,
            )
        x, report = minres(
            system.operator,
            system.rhs,
            preconditioner=precond,
            tol=config.tol,
            maxit=config.maxit,
        )
        y = system.part(x, "state")
        u = system.part(x, "control")
        p = system.part(x, "adjoint")
    return mesh, ops, system, report, (y, u, p)


def _report_json(config: RunConfig, mesh, system, report: SolveReport) -> dict:
    return {
        "config": asdict(config),
        "n": mesh.n,
        "m_B": mesh.m_b,
        "dof": 2 * mesh.n + mesh.m_b,
        "system_dim": system.total_dim,
        "iterations": report.iterations,
        "converged": report.converged,
        "final_residual": report.final_true_residual,
        "wall_time_seconds": report.wall_time_seconds,
        "residual_history": list(report.residual_history),
    }


def write_solution_csv(path_state, path_control, mesh, y, u) -> None:
    """State on grid nodes as ``x,y,value``; control along the boundary as
    ``s,value`` with the arc length measured counterclockwise from the
    origin."""
    with open(path_state, "w") as fh:
        fh.write("x,y,value\n")
        for (xx, yy), val in zip(mesh.node_coords, y):
            fh.write(f"{xx:.17g},{yy:.17g},{val:.17g}\n")
    with open(path_control, "w") as fh:
        fh.write("s,value\n")
        for k, val in enumerate(u):
            fh.write(f"{k * mesh.mesh_size:.17g},{val:.17g}\n")


def run_single(config: RunConfig, problem: ProblemInstance | None = None):
    """Run one configured solve; returns (report dict, (state, control, adjoint)).

    Writes ``report.json`` (and the solution CSVs when requested) into
    ``config.out_dir`` if set.
    """
    config.validate()
    if problem is None:
        problem = example_problem(config.example, config.beta)
    mesh, ops, system, report, (y, u, p) = _solve_configured(config, problem)
    payload = _report_json(config, mesh, system, report)
    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.json", "w") as fh:
            json.dump(payload, fh, indent=2)
        if config.write_solution:
            write_solution_csv(out / "state.csv", out / "control.csv", mesh, y, u)
    return payload, (y, u, p)


def _sweep_cell(config: RunConfig) -> str:
    try:
        payload, _ = run_single(config)
    except Exception as err:  # record and continue with the rest of the table
        return f"error:{type(err).__name__}"
    if not payload["converged"]:
        return "-"
    return f"{payload['iterations']}({payload['wall_time_seconds']:.2f})"


def run_sweep(
    example: int,
    grid_sides: list,
    betas: list,
    methods: list,
    inner: str = "exact",
    tol: float = 1e-6,
    maxit: int = 500,
    out_dir: str | None = None,
    cheb_steps: int = 20,
    cycles: int = 3,
):
    """Iteration-count tables over grids and methods, one CSV per beta.

    Returns ``{beta: {"header": [...], "rows": [[dof, cell, ...], ...]}}``
    and mirrors it to ``sweep_example<e>_beta<val>.csv`` files when
    ``out_dir`` is given.
    """
    if not grid_sides or not betas or not methods:
        raise ConfigurationError("grids, betas, and methods must be nonempty")
    for m in methods:
        if m not in METHOD_SOLVERS:
            raise ConfigurationError(f"unknown method {m!r}")
    tables = {}
    for beta in betas:
        rows = []
        for side in grid_sides:
            row = [str(2 * side * side + 4 * (side - 1))]
            for method in methods:
                config = RunConfig(
                    example=example,
                    grid_side=side,
                    beta=beta,
                    preconditioner=method,
                    inner=inner,
                    tol=tol,
                    maxit=maxit,
                    cheb_steps=cheb_steps,
                    cycles=cycles,
                )
                row.append(_sweep_cell(config))
            rows.append(row)
        tables[beta] = {"header": ["dof"] + list(methods), "rows": rows}
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            name = f"sweep_example{example}_beta{beta:.0e}.csv"
            with open(out / name, "w") as fh:
                fh.write(",".join(tables[beta]["header"]) + "\n")
                for row in rows:
                    fh.write(",".join(row) + "\n")
    return tables


def run_spectral(grid_sides: list, betas: list, out_dir: str | None = None):
    """Spectral verification reports per (grid, beta), plus the bound fit
    when the sweep is at least three grids by three betas.

    Grids beyond the dense limit are skipped with a recorded reason.
    """
    if not grid_sides or not betas:
        raise ConfigurationError("grids and betas must be nonempty")
    reports = []
    skipped = []
    for side in grid_sides:
        if side * side > DENSE_LIMIT:
            skipped.append({"grid_side": side, "reason": f"n={side * side} over dense limit"})
            continue
        mesh = build_mesh(side)
        for beta in betas:
            ops = assemble_operators(mesh, example_problem(1, beta))
            blocks = make_extended_blocks(ops, beta)
            reports.append(spectral_report(blocks, side))
    fit = None
    if len({r.grid_side for r in reports}) >= 3 and len({r.beta for r in reports}) >= 3:
        fit = bound_fit(reports)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = {
            "reports": [r.to_json() for r in reports],
            "bound_fit": fit.to_json() if fit is not None else None,
            "skipped": skipped,
        }
        with open(out / "spectral.json", "w") as fh:
            json.dump(payload, fh, indent=2)
    return reports, fit, skipped


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def export_matrices(config: RunConfig, directory) -> dict:
    """Write the assembled operators and the permuted extended matrix in
    MatrixMarket format, the load/weight vectors as text, and a manifest."""
    config.validate()
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    problem = example_problem(config.example, config.beta)
    mesh = build_mesh(config.grid_side)
    ops = assemble_operators(mesh, problem)
    system, blocks = build_extended_permuted(ops, config.beta)

    files = {}
    for name, matrix, symmetry in [
        ("M", ops.mass, "symmetric"),
        ("K", ops.stiffness, "symmetric"),
        ("Mb", ops.boundary_mass, "symmetric"),
        ("Nb", ops.boundary_coupling, "general"),
        ("Ke", blocks.stiffness_ext, "symmetric"),
        ("A_permuted", system.operator.to_sparse(), "general"),
    ]:
        path = out / f"{name}.mtx"
        mmio.write_matrix_market(path, matrix, symmetry=symmetry)
        files[name] = {
            "file": path.name,
            "shape": list(matrix.shape),
            "nnz": int(matrix.nnz),
            "sha256": _sha256(path),
        }
    for name, vec in [
        ("omega", ops.basis_integrals),
        ("b", ops.target_load),
        ("f", ops.source_load),
    ]:
        path = out / f"{name}.txt"
        mmio.write_vector(path, vec)
        files[name] = {"file": path.name, "length": len(vec), "sha256": _sha256(path)}

    manifest = {
        "example": config.example,
        "grid_side": config.grid_side,
        "mesh_size": mesh.mesh_size,
        "beta": config.beta,
        "n": mesh.n,
        "m_B": mesh.m_b,
        "dof": 2 * mesh.n + mesh.m_b,
        "system_dim": system.total_dim,
        "block_layout": system.layout_json(),
        "files": files,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest
