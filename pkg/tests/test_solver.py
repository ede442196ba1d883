"""Conjugate-gradient solver checks against direct factorizations."""

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from rectmorley.fields import product_sine_field
from rectmorley.mesh import build_jittered, build_uniform
from rectmorley.solver import cg_solve
from rectmorley.space import SparseSystem, apply_dirichlet, assemble, build_dof_map

UNIT_SQUARE = ((0.0, 1.0), (0.0, 1.0))


def dense_system(matrix, rhs):
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    return SparseSystem(
        matrix=sp.csr_matrix(np.asarray(matrix, dtype=float)),
        rhs=rhs,
        free_dofs=np.arange(n),
        n_total=n,
        constrained=True,
    )


def test_identity_converges_immediately():
    rng = np.random.default_rng(0)
    b = rng.standard_normal(12)
    x, report = cg_solve(dense_system(np.eye(12), b))
    np.testing.assert_allclose(x, b, atol=1e-14)
    assert report.converged
    assert report.iterations <= 1


def test_two_by_two_exact_solution():
    x, report = cg_solve(dense_system([[2.0, -1.0], [-1.0, 2.0]], [1.0, 1.0]))
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-12)
    assert report.converged
    assert report.iterations <= 2


def test_zero_rhs_short_circuits():
    x, report = cg_solve(dense_system(np.eye(5), np.zeros(5)))
    np.testing.assert_array_equal(x, 0.0)
    assert report.converged
    assert report.iterations == 0
    assert report.relative_residual == 0.0


def test_matches_direct_factorization_on_assembled_system():
    mesh = build_uniform(UNIT_SQUARE, (2, 2))
    dm = build_dof_map(mesh)
    system = apply_dirichlet(assemble(mesh, dm, product_sine_field(2)), dm)
    x, report = cg_solve(system, tol=1e-13)
    direct = spla.spsolve(system.matrix.tocsc(), system.rhs)
    assert report.converged
    np.testing.assert_allclose(x[system.free_dofs], direct, atol=1e-10)
    # constrained entries stay at the boundary value
    constrained = np.setdiff1d(np.arange(dm.n_dofs), system.free_dofs)
    np.testing.assert_array_equal(x[constrained], 0.0)


def test_history_is_monotone_best_so_far():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((40, 40))
    A = M @ M.T + 40 * np.eye(40)
    x, report = cg_solve(dense_system(A, rng.standard_normal(40)))
    hist = np.asarray(report.residual_history)
    assert hist.size == report.iterations
    assert np.all(np.diff(hist) <= 0.0)


def test_permutation_equivariance():
    mesh = build_jittered(UNIT_SQUARE, (4, 4), amplitude=0.3, seed=5)
    dm = build_dof_map(mesh)
    system = apply_dirichlet(assemble(mesh, dm, product_sine_field(2)), dm)
    A = system.matrix.toarray()
    b = system.rhs
    x, _ = cg_solve(system, tol=1e-13)
    rng = np.random.default_rng(6)
    perm = rng.permutation(b.size)
    xp, _ = cg_solve(dense_system(A[np.ix_(perm, perm)], b[perm]), tol=1e-13)
    np.testing.assert_allclose(xp, x[system.free_dofs][perm], atol=1e-9)


def test_iteration_cap_reports_non_convergence():
    mesh = build_uniform(UNIT_SQUARE, (6, 6))
    dm = build_dof_map(mesh)
    system = apply_dirichlet(assemble(mesh, dm, product_sine_field(2)), dm)
    rng = np.random.default_rng(9)
    hard = SparseSystem(
        matrix=system.matrix,
        rhs=rng.standard_normal(system.rhs.shape[0]),
        free_dofs=system.free_dofs,
        n_total=system.n_total,
        constrained=True,
    )
    x, report = cg_solve(hard, tol=1e-14, max_iter=3)
    assert not report.converged
    assert report.iterations == 3
    # the returned iterate is still the best one seen
    res = np.linalg.norm(hard.rhs - hard.matrix @ x[hard.free_dofs])
    assert report.relative_residual == pytest.approx(
        res / np.linalg.norm(hard.rhs), rel=1e-12
    )


def test_jacobi_beats_unpreconditioned_scaling():
    # badly scaled diagonal: Jacobi-preconditioned CG should still converge fast
    rng = np.random.default_rng(11)
    d = 10.0 ** rng.uniform(-3, 3, 30)
    A = np.diag(d)
    b = rng.standard_normal(30)
    x, report = cg_solve(dense_system(A, b), tol=1e-12)
    assert report.converged
    assert report.iterations <= 5
    np.testing.assert_allclose(x, b / d, rtol=1e-9)


def test_invalid_tolerance_raises():
    with pytest.raises(ValueError):
        cg_solve(dense_system(np.eye(2), np.ones(2)), tol=0.0)
