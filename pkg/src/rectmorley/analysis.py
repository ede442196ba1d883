"""Manufactured problems, broken-norm errors, convergence studies, rate and
lower-bound measurements.

The study machinery records err_l2 / h^2 alongside the errors: the L2 lower
bound asserts this ratio stays bounded away from zero on uniform meshes, so
its min/max band is the testable content.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import element
from .fields import SmoothField, polynomial_field, product_bubble_field, product_sine_field
from .mesh import TensorMesh, mesh_size
from .quadrature import tensor_rule
from .solver import SolveReport, cg_solve
from .space import (
    DofMap,
    FeFunction,
    apply_dirichlet,
    assemble,
    build_dof_map,
    global_interpolate,
    _cell_groups,
)


@dataclass(frozen=True)
class ManufacturedProblem:
    """Exact solution u with right-hand side f = -laplacian(u)."""

    name: str
    dim: int
    u: SmoothField
    f: SmoothField


def _negative_laplacian_field(u: SmoothField) -> SmoothField:
    if u.laplacian is None:
        raise ValueError("u must provide a Laplacian")

    def value(x: np.ndarray) -> np.ndarray:
        return -u.laplacian(x)

    return SmoothField(dim=u.dim, value=value)


def make_problem(name: str, u: SmoothField) -> ManufacturedProblem:
    return ManufacturedProblem(name=name, dim=u.dim, u=u, f=_negative_laplacian_field(u))


def problem_by_name(name: str, dim: int) -> ManufacturedProblem:
    """Built-in problems on [0,1]^dim.

    bubble: prod x_i (1 - x_i).  sinsin: prod sin(pi x_i).  zero: u = 0.
    linear: u = sum x_i (probe-only; does not satisfy the homogeneous
    boundary condition, but has f = 0 and zero consistency error).
    """
    if name == "bubble":
        return make_problem("bubble", product_bubble_field(dim))
    if name == "sinsin":
        return make_problem("sinsin", product_sine_field(dim))
    if name == "zero":
        zero = polynomial_field({(0,) * dim: 0.0}, dim)
        return make_problem("zero", zero)
    if name == "linear":
        coeffs = {}
        for j in range(dim):
            coeffs[tuple(1 if k == j else 0 for k in range(dim))] = 1.0
        return make_problem("linear", polynomial_field(coeffs, dim))
    raise ValueError(f"unknown problem {name!r} (expected bubble|sinsin|zero|linear)")


def _group_quadrature(fefun: FeFunction, quad_points_per_axis: int):
    """Yield per-size-group arrays used by the error integrals."""
    mesh = fefun.mesh
    dim = mesh.dim
    rule = tensor_rule(dim, quad_points_per_axis)
    centers = mesh.cell_centers()
    coeffs = fefun.coefficients
    dofmap = fefun.dofmap
    for half, cells in _cell_groups(mesh):
        local = coeffs[dofmap.cell_dofs[cells]] * dofmap.cell_signs[cells]
        pts = centers[cells][:, None, :] + rule.points[None, :, :] * half[None, None, :]
        jac = float(np.prod(half))
        yield half, local, pts, jac, rule


def l2_error(fefun: FeFunction, exact: SmoothField, quad_points_per_axis: int = 5) -> float:
    """Broken (elementwise) L2 distance between the FE function and a field."""
    dim = fefun.mesh.dim
    total = 0.0
    for half, local, pts, jac, rule in _group_quadrature(fefun, quad_points_per_axis):
        v0 = element.eval_basis_all(half, rule.points, (0,) * dim)
        uh = local @ v0
        ue = np.asarray(exact.value(pts), dtype=float)
        total += jac * float(((ue - uh) ** 2 @ rule.weights).sum())
    return math.sqrt(total)


def broken_h1_error(
    fefun: FeFunction,
    exact_gradient: SmoothField | Callable[[np.ndarray], np.ndarray],
    quad_points_per_axis: int = 5,
) -> float:
    """Broken H1 seminorm distance |exact - u_h|_{1,h}."""
    grad_fn = exact_gradient.gradient if isinstance(exact_gradient, SmoothField) else exact_gradient
    if grad_fn is None:
        raise ValueError("exact field lacks a gradient")
    dim = fefun.mesh.dim
    total = 0.0
    for half, local, pts, jac, rule in _group_quadrature(fefun, quad_points_per_axis):
        ge = np.asarray(grad_fn(pts), dtype=float)
        for k in range(dim):
            e = tuple(1 if j == k else 0 for j in range(dim))
            gk = element.eval_basis_all(half, rule.points, e)
            diff = ge[:, :, k] - local @ gk
            total += jac * float((diff**2 @ rule.weights).sum())
    return math.sqrt(total)


@dataclass(frozen=True)
class ConvergenceRecord:
    level: float
    h: float
    ndof: int
    err_l2: float
    err_h1: float
    rate_l2: float | None
    rate_h1: float | None
    lb_ratio: float
    solver_converged: bool = True
    solver_iterations: int = 0


def _pairwise_rate(e_prev: float, e_cur: float, h_prev: float, h_cur: float) -> float | None:
    if e_prev <= 0 or e_cur <= 0:
        return None
    return math.log(e_prev / e_cur) / math.log(h_prev / h_cur)


@dataclass(frozen=True)
class RateEstimate:
    pairwise: tuple[float | None, ...]
    slope: float | None


def estimate_rate(
    errors: Sequence[float], hs: Sequence[float], window: int = 3
) -> RateEstimate:
    """Pairwise log-ratios plus a log-log least-squares slope over the last window levels."""
    if len(errors) != len(hs):
        raise ValueError("errors and hs must have equal length")
    if len(errors) < 2:
        raise ValueError("need at least two levels")
    if any(h2 >= h1 for h1, h2 in zip(hs[:-1], hs[1:])):
        raise ValueError("hs must be strictly decreasing")
    pairwise = tuple(
        _pairwise_rate(errors[k - 1], errors[k], hs[k - 1], hs[k]) for k in range(1, len(errors))
    )
    tail = [(h, e) for h, e in list(zip(hs, errors))[-window:] if e > 0]
    slope = None
    if len(tail) >= 2:
        lh = np.log([t[0] for t in tail])
        le = np.log([t[1] for t in tail])
        slope = float(np.polyfit(lh, le, 1)[0])
    return RateEstimate(pairwise=pairwise, slope=slope)


def solve_poisson(
    problem: ManufacturedProblem,
    mesh: TensorMesh,
    quad_points_per_axis: int = 5,
    tol: float = 1e-12,
    max_iter: int | None = None,
) -> tuple[FeFunction, SolveReport, DofMap]:
    """Assemble, constrain, and solve; returns the FE solution on all DOFs."""
    dofmap = build_dof_map(mesh)
    system = assemble(mesh, dofmap, problem.f, quad_points_per_axis)
    constrained = apply_dirichlet(system, dofmap)
    x, report = cg_solve(constrained, tol=tol, max_iter=max_iter)
    return FeFunction(mesh, dofmap, x), report, dofmap


def run_study(
    problem: ManufacturedProblem,
    mesh_family: Callable[[float], TensorMesh],
    levels: Iterable[float],
    quad_points_per_axis: int = 5,
    tol: float = 1e-12,
) -> list[ConvergenceRecord]:
    """Solve on mesh_family(level) for each level and tabulate errors and rates."""
    records: list[ConvergenceRecord] = []
    prev: ConvergenceRecord | None = None
    for level in levels:
        mesh = mesh_family(level)
        fefun, report, dofmap = solve_poisson(
            problem, mesh, quad_points_per_axis=quad_points_per_axis, tol=tol
        )
        h = mesh_size(mesh)
        e_l2 = l2_error(fefun, problem.u, quad_points_per_axis)
        e_h1 = broken_h1_error(fefun, problem.u, quad_points_per_axis)
        rate_l2 = rate_h1 = None
        if prev is not None:
            rate_l2 = _pairwise_rate(prev.err_l2, e_l2, prev.h, h)
            rate_h1 = _pairwise_rate(prev.err_h1, e_h1, prev.h, h)
        rec = ConvergenceRecord(
            level=level,
            h=h,
            ndof=dofmap.n_dofs,
            err_l2=e_l2,
            err_h1=e_h1,
            rate_l2=rate_l2,
            rate_h1=rate_h1,
            lb_ratio=e_l2 / h**2,
            solver_converged=report.converged,
            solver_iterations=report.iterations,
        )
        records.append(rec)
        prev = rec
    return records


def superclose_pairing(
    mesh: TensorMesh,
    dofmap: DofMap,
    problem: ManufacturedProblem,
    quad_points_per_axis: int = 5,
) -> float:
    """The pairing a_h(u - Pi_h u, Pi_h u) for the problem's exact solution."""
    if problem.u.gradient is None:
        raise ValueError("problem solution lacks a gradient")
    interp = global_interpolate(mesh, dofmap, problem.u)
    dim = mesh.dim
    total = 0.0
    for half, local, pts, jac, rule in _group_quadrature(interp, quad_points_per_axis):
        gu = np.asarray(problem.u.gradient(pts), dtype=float)
        for k in range(dim):
            e = tuple(1 if j == k else 0 for j in range(dim))
            gk = element.eval_basis_all(half, rule.points, e)
            g_interp = local @ gk
            total += jac * float((((gu[:, :, k] - g_interp) * g_interp) @ rule.weights).sum())
    return total


CSV_HEADER = "level,h,ndof,err_l2,err_h1,rate_l2,rate_h1,lb_ratio"


def _fmt(x: float | None) -> str:
    if x is None:
        return ""
    return repr(float(x))


def records_to_csv(records: Sequence[ConvergenceRecord]) -> str:
    lines = [CSV_HEADER]
    for r in records:
        level = int(r.level) if float(r.level).is_integer() else r.level
        lines.append(
            ",".join(
                [
                    str(level),
                    _fmt(r.h),
                    str(r.ndof),
                    _fmt(r.err_l2),
                    _fmt(r.err_h1),
                    _fmt(r.rate_l2),
                    _fmt(r.rate_h1),
                    _fmt(r.lb_ratio),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def record_to_dict(r: ConvergenceRecord) -> dict:
    return {
        "level": r.level,
        "h": r.h,
        "ndof": r.ndof,
        "err_l2": r.err_l2,
        "err_h1": r.err_h1,
        "rate_l2": r.rate_l2,
        "rate_h1": r.rate_h1,
        "lb_ratio": r.lb_ratio,
        "solver_converged": r.solver_converged,
        "solver_iterations": r.solver_iterations,
    }


def records_to_json(records: Sequence[ConvergenceRecord], metadata: dict) -> dict:
    return {"metadata": dict(metadata), "records": [record_to_dict(r) for r in records]}
