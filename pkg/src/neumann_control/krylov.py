"""Iterative solvers: full GMRES, preconditioned MINRES, and the Chebyshev
semi-iteration used as a fixed linear mass solve.

GMRES is right-preconditioned and stops on the true unpreconditioned
relative residual, so reported iteration counts are comparable across
preconditioners.  MINRES stops on the preconditioner-norm residual of its
recurrence and records the true residual history alongside.  Both solvers
start from the zero vector and never modify their inputs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass
class SolveReport:
    """Convergence record of one Krylov solve.

    ``residual_history`` holds the true relative 2-norm residuals, one entry
    per iterate including the initial guess; it drives the stopping test for
    both solvers.  MINRES additionally records its recurrence residuals
    (measured in the preconditioner norm) in ``precond_residual_history``,
    since the two can differ by orders of magnitude for strong
    preconditioners.
    """

    iterations: int
    residual_history: list = field(default_factory=list)
    converged: bool = False
    wall_time_seconds: float = 0.0
    final_true_residual: float = float("nan")
    precond_residual_history: list | None = None

    def to_json(self) -> dict:
        out = {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_true_residual": self.final_true_residual,
            "wall_time_seconds": self.wall_time_seconds,
            "residual_history": list(self.residual_history),
        }
        if self.precond_residual_history is not None:
            out["precond_residual_history"] = list(self.precond_residual_history)
        return out


def _as_operator(a):
    if callable(a) and not sp.issparse(a) and not isinstance(a, np.ndarray):
        return a
    if sp.issparse(a) or isinstance(a, np.ndarray):
        return lambda x: a @ x
    raise TypeError(f"cannot interpret {type(a)!r} as a linear operator")


class _GrowingBasis:
    """Row-per-vector storage that doubles capacity as vectors are added."""

    def __init__(self, dim, capacity=32):
        self.data = np.empty((capacity, dim))
        self.count = 0

    def append(self, v):
        if self.count == self.data.shape[0]:
            grown = np.empty((2 * self.data.shape[0], self.data.shape[1]))
            grown[: self.count] = self.data
            self.data = grown
        self.data[self.count] = v
        self.count += 1

    def __getitem__(self, i):
        return self.data[i]

    def combine(self, coeffs):
        return coeffs @ self.data[: len(coeffs)]


def gmres(apply_a, rhs, *, preconditioner=None, tol=1e-6, maxit=500):
    """Full (non-restarted) right-preconditioned GMRES from the zero vector.

    Stops as soon as ``||rhs - A x|| / ||rhs|| <= tol`` where the residual is
    recomputed from the current iterate every iteration.  Reaching ``maxit``
    sets ``converged=False`` on the report instead of raising; an Arnoldi
    breakdown with a nonzero residual raises ``RuntimeError``.
    """
    if tol <= 0 or maxit < 1:
        raise ValueError("tol must be positive and maxit at least 1")
    apply_a = _as_operator(apply_a)
    apply_p = _as_operator(preconditioner) if preconditioner is not None else None
    b = np.asarray(rhs, dtype=float)
    dim = b.shape[0]
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros(dim), SolveReport(
            iterations=0, residual_history=[0.0], converged=True, final_true_residual=0.0
        )

    basis = _GrowingBasis(dim)
    pbasis = _GrowingBasis(dim)
    hess = np.zeros((maxit + 1, maxit))
    givens_c = np.zeros(maxit)
    givens_s = np.zeros(maxit)
    g = np.zeros(maxit + 1)
    g[0] = norm_b
    basis.append(b / norm_b)

    history = [1.0]
    x = np.zeros(dim)
    converged = False
    start = time.perf_counter()
    j = 0
    for j in range(maxit):
        z = apply_p(basis[j]) if apply_p is not None else basis[j].copy()
        pbasis.append(z)
        w = apply_a(z)
        norm_w0 = np.linalg.norm(w)
        for i in range(j + 1):
            hij = np.dot(w, basis[i])
            hess[i, j] = hij
            w -= hij * basis[i]
        hnext = np.linalg.norm(w)
        hess[j + 1, j] = hnext

        for i in range(j):
            hi, hi1 = hess[i, j], hess[i + 1, j]
            hess[i, j] = givens_c[i] * hi + givens_s[i] * hi1
            hess[i + 1, j] = -givens_s[i] * hi + givens_c[i] * hi1
        denom = np.hypot(hess[j, j], hess[j + 1, j])
        givens_c[j] = hess[j, j] / denom
        givens_s[j] = hess[j + 1, j] / denom
        hess[j, j] = denom
        hess[j + 1, j] = 0.0
        g[j + 1] = -givens_s[j] * g[j]
        g[j] = givens_c[j] * g[j]

        y = np.zeros(j + 1)
        for i in range(j, -1, -1):
            y[i] = (g[i] - hess[i, i + 1 : j + 1] @ y[i + 1 : j + 1]) / hess[i, i]
        x = pbasis.combine(y)
        true_res = np.linalg.norm(b - apply_a(x)) / norm_b
        history.append(true_res)
        if true_res <= tol:
            converged = True
            break
        if hnext <= 1e-14 * max(norm_w0, 1.0):
            raise RuntimeError(
                f"Arnoldi breakdown at iteration {j + 1} with residual {true_res:.3e} > tol"
            )
        basis.append(w / hnext)
    elapsed = time.perf_counter() - start

    report = SolveReport(
        iterations=len(history) - 1,
        residual_history=history,
        converged=converged,
        wall_time_seconds=elapsed,
        final_true_residual=history[-1],
    )
    return x, report


def _check_symmetric(apply_a, dim, probes=3, rtol=1e-8, seed=1234):
    rng = np.random.default_rng(seed)
    for _ in range(probes):
        x = rng.standard_normal(dim)
        y = rng.standard_normal(dim)
        ax = apply_a(x)
        ay = apply_a(y)
        scale = np.linalg.norm(ax) * np.linalg.norm(y) + np.linalg.norm(ay) * np.linalg.norm(x)
        if abs(np.dot(ax, y) - np.dot(ay, x)) > rtol * max(scale, 1e-300):
            return False
    return True


def minres(apply_a, rhs, *, preconditioner=None, tol=1e-6, maxit=500, check_operator=True):
    """Preconditioned MINRES for symmetric systems (Paige-Saunders recurrence).

    The preconditioner must apply a fixed symmetric positive definite
    operator.  Stopping is on the true relative 2-norm residual of the
    running iterate, which is what makes iteration counts comparable with
    the GMRES runs; the recurrence residuals (preconditioner norm) are
    recorded alongside in ``precond_residual_history``.  The operator is
    probe-checked for symmetry up front and a ``ValueError`` is raised when
    the check fails (e.g. for the permuted extended system).
    """
    if tol <= 0 or maxit < 1:
        raise ValueError("tol must be positive and maxit at least 1")
    apply_a = _as_operator(apply_a)
    apply_m = _as_operator(preconditioner) if preconditioner is not None else (lambda v: v.copy())
    b = np.asarray(rhs, dtype=float)
    dim = b.shape[0]
    if check_operator and not _check_symmetric(apply_a, dim):
        raise ValueError("minres requires a symmetric operator; probe check failed")
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros(dim), SolveReport(
            iterations=0,
            residual_history=[0.0],
            converged=True,
            final_true_residual=0.0,
            precond_residual_history=[0.0],
        )

    x = np.zeros(dim)
    r1 = b.copy()
    y = apply_m(r1)
    beta1_sq = np.dot(r1, y)
    if beta1_sq < 0:
        raise ValueError("preconditioner is not positive definite")
    beta1 = np.sqrt(beta1_sq)

    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs = -1.0
    sn = 0.0
    w = np.zeros(dim)
    w2 = np.zeros(dim)
    r2 = r1.copy()

    history = [1.0]
    precond_history = [1.0]
    converged = False
    start = time.perf_counter()
    for _ in range(maxit):
        s = 1.0 / beta
        v = s * y
        y = apply_a(v)
        if oldb > 0.0:
            y -= (beta / oldb) * r1
        alfa = np.dot(v, y)
        y -= (alfa / beta) * r2
        r1 = r2
        r2 = y
        y = apply_m(r2)
        oldb = beta
        beta_sq = np.dot(r2, y)
        if beta_sq < 0:
            raise ValueError("preconditioner is not positive definite")
        beta = np.sqrt(beta_sq)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), np.finfo(float).eps)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w

        precond_history.append(phibar / beta1)
        history.append(np.linalg.norm(b - apply_a(x)) / norm_b)
        if history[-1] <= tol:
            converged = True
            break
        if beta == 0.0:
            break  # Lanczos breakdown: Krylov space exhausted
    elapsed = time.perf_counter() - start

    report = SolveReport(
        iterations=len(history) - 1,
        residual_history=history,
        converged=converged,
        wall_time_seconds=elapsed,
        final_true_residual=history[-1],
        precond_residual_history=precond_history,
    )
    return x, report


class ChebyshevMassSolver:
    """Fixed-polynomial approximation of a mass matrix solve.

    Runs a set number of diagonally preconditioned Chebyshev steps (relaxed
    Jacobi with the relaxation folded into the recurrence) over a fixed
    eigenvalue interval for ``diag(M)^{-1} M``.  The default interval
    [0.5, 2.0] covers P1 mass matrices on triangles, and also contains the
    [0.5, 1.5] range of the 1D boundary mass.  Because the step count and
    interval are fixed, the map rhs -> x is linear and symmetric positive
    definite, as required inside MINRES.
    """

    def __init__(self, mass, steps: int = 20, interval=(0.5, 2.0), jacobi_diag=None):
        if steps < 1:
            raise ValueError("steps must be at least 1")
        self.mass = mass
        self.steps = steps
        diag = np.asarray(jacobi_diag if jacobi_diag is not None else mass.diagonal(), dtype=float)
        if np.any(diag <= 0):
            raise ValueError("Jacobi diagonal must be positive")
        self.jacobi_diag = diag
        lo, hi = interval
        if not 0 < lo < hi:
            raise ValueError(f"invalid eigenvalue interval {interval}")
        self.theta = 0.5 * (hi + lo)
        self.delta = 0.5 * (hi - lo)

    def __call__(self, rhs: np.ndarray) -> np.ndarray:
        r = np.asarray(rhs, dtype=float).copy()
        x = np.zeros_like(r)
        sigma1 = self.theta / self.delta
        rho = 1.0 / sigma1
        d = (r / self.jacobi_diag) / self.theta
        for k in range(self.steps):
            x += d
            if k == self.steps - 1:
                break
            r -= self.mass @ d
            rho_new = 1.0 / (2.0 * sigma1 - rho)
            d = rho_new * rho * d + (2.0 * rho_new / self.delta) * (r / self.jacobi_diag)
            rho = rho_new
        return x


def chebyshev_mass_apply(mass, jacobi_diag, rhs, steps: int = 20, interval=(0.5, 2.0)):
    """One-shot form of :class:`ChebyshevMassSolver`."""
    return ChebyshevMassSolver(mass, steps=steps, interval=interval, jacobi_diag=jacobi_diag)(rhs)
