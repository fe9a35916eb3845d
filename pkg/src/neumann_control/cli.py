"""Command line interface.

Subcommands: ``solve`` (one configured run), ``sweep`` (iteration tables
over grids/methods), ``spectrum`` (dense spectral verification sweep), and
``export`` (MatrixMarket dumps plus manifest).

Exit codes: 0 on success, 2 on configuration errors, 3 when ``solve
--strict`` does not converge within the iteration cap.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import (
    ConfigurationError,
    METHOD_SOLVERS,
    RunConfig,
    export_matrices,
    run_single,
    run_spectral,
    run_sweep,
)


def _int_list(text: str) -> list:
    return [int(t) for t in text.split(",") if t]


def _float_list(text: str) -> list:
    return [float(t) for t in text.split(",") if t]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--example", type=int, default=1, help="benchmark problem (1 or 2)")
    p.add_argument("--beta", type=float, default=1e-2, help="regularization parameter")
    p.add_argument("--inner", default="exact", choices=("exact", "approx"),
                   help="inner stiffness solves: sparse factorization or multigrid cycles")
    p.add_argument("--tol", type=float, default=1e-6, help="relative residual tolerance")
    p.add_argument("--maxit", type=int, default=500, help="iteration cap")
    p.add_argument("--cheb-steps", type=int, default=20, help="Chebyshev steps for mass solves")
    p.add_argument("--cycles", type=int, default=3, help="multigrid cycles per inner solve")
    p.add_argument("--out", default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neumann-control",
        description="Preconditioned Krylov solvers for Neumann boundary control",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="assemble and solve one configuration")
    _add_common(p)
    p.add_argument("--grid", type=int, default=33, help="nodes per side")
    p.add_argument("--precond", default="phat2", choices=sorted(METHOD_SOLVERS))
    p.add_argument("--solver", default=None, choices=("gmres", "minres"),
                   help="optional, checked against the preconditioner")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--write-solution", action="store_true",
                   help="also write state.csv and control.csv")
    p.add_argument("--strict", action="store_true",
                   help="exit with code 3 if the solve does not converge")

    p = sub.add_parser("sweep", help="iteration tables over grids and methods")
    _add_common(p)
    p.add_argument("--grids", type=_int_list, default=[33, 65], help="comma separated")
    p.add_argument("--betas", type=_float_list, default=None,
                   help="comma separated; defaults to --beta")
    p.add_argument("--methods", default="rees,pearson,phatI,phat2",
                   help="comma separated preconditioner names")

    p = sub.add_parser("spectrum", help="dense spectral verification sweep")
    p.add_argument("--grids", type=_int_list, default=[4, 5, 7])
    p.add_argument("--betas", type=_float_list, default=[1e-2, 1e-4, 1e-6])
    p.add_argument("--out", default=None)

    p = sub.add_parser("export", help="write matrices, vectors, and manifest")
    _add_common(p)
    p.add_argument("--grid", type=int, default=33)
    p.add_argument("--precond", default="phat2", choices=sorted(METHOD_SOLVERS))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            config = RunConfig(
                example=args.example,
                grid_side=args.grid,
                beta=args.beta,
                preconditioner=args.precond,
                solver=args.solver,
                inner=args.inner,
                tol=args.tol,
                maxit=args.maxit,
                cheb_steps=args.cheb_steps,
                cycles=args.cycles,
                seed=args.seed,
                out_dir=args.out,
                write_solution=args.write_solution,
            )
            payload, _ = run_single(config)
            print(json.dumps({k: payload[k] for k in
                              ("dof", "iterations", "converged", "final_residual",
                               "wall_time_seconds")}))
            if args.strict and not payload["converged"]:
                return 3
        elif args.command == "sweep":
            betas = args.betas if args.betas else [args.beta]
            methods = [m for m in args.methods.split(",") if m]
            tables = run_sweep(
                args.example,
                args.grids,
                betas,
                methods,
                inner=args.inner,
                tol=args.tol,
                maxit=args.maxit,
                out_dir=args.out,
                cheb_steps=args.cheb_steps,
                cycles=args.cycles,
            )
            for beta, table in tables.items():
                print(f"# example {args.example}, beta {beta:g}")
                print(",".join(table["header"]))
                for row in table["rows"]:
                    print(",".join(row))
        elif args.command == "spectrum":
            reports, fit, skipped = run_spectral(args.grids, args.betas, out_dir=args.out)
            for r in reports:
                print(
                    f"grid {r.grid_side} beta {r.beta:g}: mu in [{r.mu_min:.6g}, "
                    f"{r.mu_max:.6g}], multiplicity(1) = {r.multiplicity_one}, "
                    f"trace gap {r.trace_gap:.2e}"
                )
            for s in skipped:
                print(f"skipped grid {s['grid_side']}: {s['reason']}")
            if fit is not None:
                print(
                    f"bound fit: c in [{fit.c_lo:.3e} (envelope), {fit.c_fit:.3e} (ls)], "
                    f"d in [{fit.d_fit:.3e} (ls), {fit.d_hi:.3e} (envelope)], "
                    f"inclusion {'ok' if fit.inclusion_ok else 'VIOLATED'}"
                )
        elif args.command == "export":
            config = RunConfig(
                example=args.example,
                grid_side=args.grid,
                beta=args.beta,
                preconditioner=args.precond,
                inner=args.inner,
            )
            manifest = export_matrices(config, args.out or ".")
            print(json.dumps({"dof": manifest["dof"], "files": sorted(manifest["files"])}))
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
