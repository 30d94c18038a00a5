"""Jacobi-preconditioned conjugate gradients with reproducible arithmetic."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class SolverError(RuntimeError):
    def __init__(self, message: str, stats: "SolveStats"):
        super().__init__(message)
        self.stats = stats


@dataclass
class SolveStats:
    iterations: int
    relative_residual: float
    converged: bool
    breakdown: bool = False
    breakdown_iteration: int | None = None
    energy: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "relative_residual": self.relative_residual,
            "converged": self.converged,
            "breakdown": self.breakdown,
            "breakdown_iteration": self.breakdown_iteration,
        }


def dot(a: np.ndarray, b: np.ndarray) -> float:
    """Inner product summed by numpy's fixed pairwise tree (no BLAS)."""
    return float(np.sum(a * b))


class RowBlockOperator:
    """``y = M x`` split over fixed row blocks.

    Each row is computed by the same compiled kernel whatever the block layout,
    so the product is bit-identical for any thread count.
    """

    def __init__(self, M: sp.csr_matrix, threads: int = 1):
        self.M = M
        self.threads = max(1, int(threads))
        n = M.shape[0]
        bounds = np.linspace(0, n, self.threads + 1).astype(int)
        self.blocks = [(int(bounds[k]), int(bounds[k + 1]), M[bounds[k]:bounds[k + 1]])
                       for k in range(self.threads)]
        self.pool = ThreadPoolExecutor(self.threads) if self.threads > 1 else None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.pool is None:
            return self.M @ x
        y = np.empty(self.M.shape[0])

        def run(block):
            i0, i1, Mb = block
            y[i0:i1] = Mb @ x

        list(self.pool.map(run, self.blocks))
        return y

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def cg_solve(system, tol: float = 1e-10, maxit: int | None = None, precond: str | None = "jacobi",
             threads: int = 1, x0: np.ndarray | None = None, raise_on_failure: bool = True):
    """Solve ``M x = b`` for a symmetric positive definite system.

    ``system`` is a :class:`SparseSystem` or a ``(matrix, rhs)`` pair. Stops once
    the true relative residual ``|b - M x| / |b|`` is at most ``tol``. The
    energy ``x^T M x / 2 - b^T x`` after every step is kept in the stats.
    """
    if isinstance(system, tuple):
        M, b = system
    else:
        M, b = system.matrix, system.rhs
    M = sp.csr_matrix(M)
    b = np.asarray(b, dtype=float)
    n = b.size
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    if maxit is None:
        maxit = max(1000, 10 * n)
    if precond not in (None, "none", "jacobi"):
        raise ValueError(f"unknown preconditioner {precond!r}")
    if precond == "jacobi":
        diag = M.diagonal()
        if np.any(diag <= 0):
            raise ValueError("Jacobi preconditioning needs a positive diagonal")
        inv_diag = 1.0 / diag
    else:
        inv_diag = None

    op = RowBlockOperator(M, threads)
    try:
        return _pcg(op, b, tol, maxit, inv_diag, x0, raise_on_failure)
    finally:
        op.close()


def _pcg(op, b, tol, maxit, inv_diag, x0, raise_on_failure):
    bnorm = np.sqrt(dot(b, b))
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros_like(b), SolveStats(0, 0.0, True, energy=[0.0])
    r = b - op(x) if x0 is not None else b.copy()
    energy = [-0.5 * dot(x, b + r)]
    rel = np.sqrt(dot(r, r)) / bnorm
    if rel <= tol:
        return x, SolveStats(0, rel, True, energy=energy)
    z = r * inv_diag if inv_diag is not None else r
    p = z.copy()
    rz = dot(r, z)
    it = 0
    while it < maxit:
        it += 1
        Mp = op(p)
        pMp = dot(p, Mp)
        if not pMp > 0.0:
            stats = SolveStats(it, rel, False, breakdown=True, breakdown_iteration=it, energy=energy)
            if raise_on_failure:
                raise SolverError(f"CG breakdown at iteration {it}: p^T M p = {pMp:.3e}", stats)
            return x, stats
        alpha = rz / pMp
        x += alpha * p
        r -= alpha * Mp
        energy.append(-0.5 * dot(x, b + r))
        rel = np.sqrt(dot(r, r)) / bnorm
        if rel <= tol:
            # confirm against the true residual before stopping
            r = b - op(x)
            rel = np.sqrt(dot(r, r)) / bnorm
            if rel <= tol:
                return x, SolveStats(it, rel, True, energy=energy)
        z = r * inv_diag if inv_diag is not None else r
        rz_new = dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    stats = SolveStats(it, rel, False, energy=energy)
    if raise_on_failure:
        raise SolverError(f"CG did not reach tol {tol:g} in {maxit} iterations (residual {rel:.3e})", stats)
    return x, stats
