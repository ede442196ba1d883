"""Jacobi-preconditioned conjugate gradients for the constrained SPD system."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .space import SparseSystem


@dataclass
class SolveReport:
    iterations: int
    relative_residual: float
    converged: bool
    # best-so-far preconditioned residual norms, one entry per iteration
    residual_history: list[float] = field(default_factory=list)


def cg_solve(
    system: SparseSystem, tol: float = 1e-12, max_iter: int | None = None
) -> tuple[np.ndarray, SolveReport]:
    """Solve the free-DOF system; returns the full-length coefficient vector.

    Constrained DOFs receive 0. Stops when ||r|| / ||b|| <= tol; the best
    iterate seen (smallest preconditioned residual) is returned either way.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    A = system.matrix
    b = system.rhs
    n = b.shape[0]
    if max_iter is None:
        max_iter = max(10 * n, 100)

    full = np.zeros(system.n_total)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return full, SolveReport(iterations=0, relative_residual=0.0, converged=True)

    diag = A.diagonal().copy()
    diag[diag <= 0] = 1.0
    inv_diag = 1.0 / diag

    x = np.zeros(n)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    best_x = x.copy()
    best_rz = rz
    history: list[float] = []
    iterations = 0
    rel = float(np.linalg.norm(r)) / b_norm

    while rel > tol and iterations < max_iter:
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            # matrix not positive definite along p; stop with the best iterate
            break
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        z = inv_diag * r
        rz_next = float(r @ z)
        iterations += 1
        if rz_next < best_rz:
            best_rz = rz_next
            best_x = x.copy()
        history.append(float(np.sqrt(best_rz)))
        beta = rz_next / rz
        rz = rz_next
        p = z + beta * p
        rel = float(np.linalg.norm(r)) / b_norm

    # return whichever of (current, best-seen) has the smaller true residual
    rel_current = float(np.linalg.norm(b - A @ x)) / b_norm
    rel_best = float(np.linalg.norm(b - A @ best_x)) / b_norm
    if rel_current <= rel_best:
        final_x, rel_final = x, rel_current
    else:
        final_x, rel_final = best_x, rel_best
    full[system.free_dofs] = final_x
    return full, SolveReport(
        iterations=iterations,
        relative_residual=rel_final,
        converged=rel_final <= tol,
        residual_history=history,
    )
