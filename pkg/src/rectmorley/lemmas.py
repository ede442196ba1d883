"""Numerical certification of the structural facts the scheme rests on.

Each check draws seeded random trials, reduces to a max residual, and wraps
the outcome in a LemmaReport. Cell-local identities (unisolvence, boundary
orthogonality, the interpolation-error expansion) are checked on random cells;
patch orthogonality, the stable decomposition, and the consistency probes act
on meshes.

Two consistency quantities are exposed. consistency_probe normalizes each
global basis function individually; because a single basis function only sees
an O(h^d) neighborhood, its decay rate carries an extra d/2 beyond the
subspace consistency rate. consistency_dual_norm computes the consistency
functional's dual norm over the whole vertex- or face-class subspace (a CG
solve on the class-restricted stiffness block), which decays at the subspace
rates: order 2 on uniform meshes and order 1 on general shape-regular ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import element
from .analysis import ManufacturedProblem
from .fields import SmoothField, polynomial_field, product_sine_field
from .mesh import Cell, TensorMesh
from .quadrature import face_rule, tensor_rule
from . import space
from .solver import cg_solve
from .space import DofMap, SparseSystem

DEFAULT_SEED = 20240901


@dataclass(frozen=True)
class LemmaReport:
    lemma: str
    dim: int
    trials: int
    seed: int
    tolerance: float
    max_residual: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "lemma": self.lemma,
            "dim": self.dim,
            "trials": self.trials,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "max_residual": self.max_residual,
            "pass": self.passed,
        }


def _report(lemma: str, dim: int, trials: int, seed: int, tolerance: float, residual: float) -> LemmaReport:
    return LemmaReport(
        lemma=lemma,
        dim=dim,
        trials=trials,
        seed=seed,
        tolerance=tolerance,
        max_residual=float(residual),
        passed=bool(residual <= tolerance),
    )


def random_cell(dim: int, rng: np.random.Generator) -> Cell:
    """Cell with order-1 coordinates and aspect ratios up to ~12."""
    center = tuple(float(c) for c in rng.uniform(-2.0, 2.0, dim))
    half = tuple(float(h) for h in np.exp(rng.uniform(-1.5, 1.0, dim)))
    return Cell(center=center, half_lengths=half)


def random_linear(dim: int, rng: np.random.Generator) -> SmoothField:
    coeffs = {(0,) * dim: float(rng.uniform(-1, 1))}
    for j in range(dim):
        coeffs[tuple(1 if k == j else 0 for k in range(dim))] = float(rng.uniform(-1, 1))
    return polynomial_field(coeffs, dim)


@dataclass(frozen=True)
class PatchSpec:
    """Two cells sharing the full face orthogonal to `axis` at face_center.

    cross_half_lengths lists the common half-lengths of the d-1 remaining
    axes in order; h_left/h_right are the half-lengths along `axis`.
    """

    axis: int
    face_center: tuple[float, ...]
    cross_half_lengths: tuple[float, ...]
    h_left: float
    h_right: float

    def __post_init__(self) -> None:
        if self.h_left <= 0 or self.h_right <= 0:
            raise ValueError("patch half-lengths must be positive")
        if len(self.cross_half_lengths) != len(self.face_center) - 1:
            raise ValueError("need one cross half-length per non-axis direction")
        if any(h <= 0 for h in self.cross_half_lengths):
            raise ValueError("cross half-lengths must be positive")
        if not 0 <= self.axis < len(self.face_center):
            raise ValueError("axis out of range")

    @property
    def dim(self) -> int:
        return len(self.face_center)

    def cells(self) -> tuple[Cell, Cell]:
        j = self.axis
        cross = list(self.cross_half_lengths)
        half_l = cross.copy()
        half_l.insert(j, self.h_left)
        half_r = cross.copy()
        half_r.insert(j, self.h_right)
        cl = list(self.face_center)
        cl[j] -= self.h_left
        cr = list(self.face_center)
        cr[j] += self.h_right
        return (
            Cell(center=tuple(cl), half_lengths=tuple(half_l)),
            Cell(center=tuple(cr), half_lengths=tuple(half_r)),
        )


def _boundary_moment(cell: Cell, local_coeffs: np.ndarray, p1: SmoothField, axis: int) -> float:
    """int_{dK} p1 * (local Morley function) * n_axis ds."""
    dim = cell.dim
    total = 0.0
    for a, side in element.local_faces(dim):
        if a != axis:
            continue
        rule = face_rule(dim, a, side, 4)
        pts = element.from_reference(cell, rule.points)
        vals = local_coeffs @ element.eval_basis_all(cell.half_lengths, rule.points, (0,) * dim)
        p1_vals = np.asarray(p1.value(pts), dtype=float)
        measure = np.prod([h for k, h in enumerate(cell.half_lengths) if k != a])
        total += side * float((p1_vals * vals) @ rule.weights) * float(measure)
    return total


def check_patch_orthogonality(
    patch: PatchSpec,
    trials: int = 100,
    seed: int = DEFAULT_SEED,
    tolerance: float = 1e-12,
) -> LemmaReport:
    """max_i |int_{d omega_f} p1 psi n_i ds| over random p1 and the face function psi.

    psi is the one-dimensional face-class function of the shared face: the
    q-function of the xi_axis = +1 face on the left cell and minus the
    q-function of the xi_axis = -1 face on the right cell, so its face-mean
    normal derivative is continuous w.r.t. the positive-axis normal. The sum
    over both cell boundaries equals the patch-boundary integral because psi
    vanishes pointwise on the shared face.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    dim = patch.dim
    rng = np.random.default_rng(seed)
    cell_l, cell_r = patch.cells()
    nloc = element.n_local_dofs(dim)
    nv = 2**dim
    worst = 0.0
    for _ in range(trials):
        p1 = random_linear(dim, rng)
        alpha = float(rng.uniform(0.5, 2.0))
        coeff_l = np.zeros(nloc)
        coeff_l[nv + 2 * patch.axis] = alpha  # xi_axis = +1 face of K_L
        coeff_r = np.zeros(nloc)
        coeff_r[nv + 2 * patch.axis + 1] = -alpha  # xi_axis = -1 face of K_R
        for i in range(dim):
            moment = _boundary_moment(cell_l, coeff_l, p1, i) + _boundary_moment(
                cell_r, coeff_r, p1, i
            )
            worst = max(worst, abs(moment))
    return _report("patch-orthogonality", dim, trials, seed, tolerance, worst)


def check_cell_orthogonality(
    dim: int,
    trials: int = 100,
    seed: int = DEFAULT_SEED,
    tolerance: float = 1e-12,
) -> LemmaReport:
    """Cell-local boundary orthogonality on random cells.

    Vertex class: int_{dK} p1 (phi - Q1 interpolant of phi) n_i ds = 0 for
    phi in the span of the vertex functions. Face class: the same boundary
    moment of any face-class function alone vanishes.
    """
    rng = np.random.default_rng(seed)
    nv = 2**dim
    nloc = element.n_local_dofs(dim)
    worst = 0.0
    for _ in range(trials):
        cell = random_cell(dim, rng)
        p1 = random_linear(dim, rng)
        phi = np.zeros(nloc)
        phi[:nv] = rng.uniform(-1, 1, nv)
        psi = np.zeros(nloc)
        psi[nv:] = rng.uniform(-1, 1, 2 * dim)
        # vertex values of phi are its vertex coefficients, by duality
        q1 = element.Q1Interpolant(cell, phi[:nv])
        for i in range(dim):
            moment = 0.0
            for a, side in element.local_faces(dim):
                if a != i:
                    continue
                rule = face_rule(dim, a, side, 4)
                pts = element.from_reference(cell, rule.points)
                basis_vals = element.eval_basis_all(cell.half_lengths, rule.points, (0,) * dim)
                gap = phi @ basis_vals - q1.value(pts)
                p1_vals = np.asarray(p1.value(pts), dtype=float)
                measure = float(
                    np.prod([h for k, h in enumerate(cell.half_lengths) if k != a])
                )
                moment += side * float((p1_vals * gap) @ rule.weights) * measure
            worst = max(worst, abs(moment))
        # face-class orthogonality holds with constant weight only; the
        # linear-weighted moment cancels across neighbor pairs, not per cell
        one = polynomial_field({(0,) * dim: 1.0}, dim)
        for i in range(dim):
            worst = max(worst, abs(_boundary_moment(cell, psi, one, i)))
    return _report("cell-boundary-orthogonality", dim, trials, seed, tolerance, worst)


@dataclass(frozen=True)
class ThetaEstimate:
    pairwise: float
    cross: float


def compute_theta(cell: Cell) -> ThetaEstimate:
    """Strengthened Cauchy-Schwarz constants of one cell.

    pairwise: max over face-function pairs i != j of
    |(grad q_i, grad q_j)| / (|grad q_i|^2 + |grad q_j|^2); equals 1/8 exactly
    (attained by the two functions of a common axis; cross-axis pairs are
    orthogonal). cross: the optimal constant between the vertex and face
    subspaces, sup |(grad phi, grad psi)| / (|grad phi|^2 + |grad psi|^2),
    computed as half the largest singular value of the whitened coupling
    block, with the constant function's direction removed from the vertex
    block's Gram matrix.
    """
    dim = cell.dim
    nv = 2**dim
    a_loc = element.local_stiffness(cell)
    a_xx = a_loc[:nv, :nv]
    a_ff = a_loc[nv:, nv:]
    a_xf = a_loc[:nv, nv:]

    pairwise = 0.0
    for i in range(2 * dim):
        for j in range(i + 1, 2 * dim):
            denom = a_ff[i, i] + a_ff[j, j]
            pairwise = max(pairwise, abs(a_ff[i, j]) / denom)

    # whiten both blocks; drop the constant-vector null direction of a_xx
    w_x, v_x = np.linalg.eigh(a_xx)
    keep = w_x > 1e-12 * w_x.max()
    x_half = v_x[:, keep] / np.sqrt(w_x[keep])
    w_f, v_f = np.linalg.eigh(a_ff)
    f_half = v_f / np.sqrt(w_f)
    coupled = x_half.T @ a_xf @ f_half
    sigma = float(np.linalg.svd(coupled, compute_uv=False)[0])
    return ThetaEstimate(pairwise=float(pairwise), cross=0.5 * sigma)


def theta_hat(cell: Cell) -> float:
    est = compute_theta(cell)
    return max(est.pairwise, est.cross)


def check_theta(
    dim: int,
    trials: int = 100,
    seed: int = DEFAULT_SEED,
    tolerance: float = 1e-12,
) -> LemmaReport:
    """pairwise = 1/8 exactly and cross < 1/2 on random cells."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        cell = random_cell(dim, rng)
        est = compute_theta(cell)
        worst = max(worst, abs(est.pairwise - 0.125))
        worst = max(worst, max(0.0, est.cross - 0.5))
    return _report("strengthened-cauchy-schwarz", dim, trials, seed, tolerance, worst)


def check_unisolvence(
    dim: int,
    trials: int = 100,
    seed: int = DEFAULT_SEED,
    tolerance: float = 1e-12,
) -> LemmaReport:
    """DOF matrix of the explicit basis equals the identity on random cells."""
    rng = np.random.default_rng(seed)
    eye = np.eye(element.n_local_dofs(dim))
    worst = 0.0
    for _ in range(trials):
        cell = random_cell(dim, rng)
        worst = max(worst, float(np.max(np.abs(element.dof_matrix(cell) - eye))))
    return _report("unisolvence", dim, trials, seed, tolerance, worst)


def check_expansion_identity(
    dim: int,
    trials: int = 100,
    seed: int = DEFAULT_SEED,
    tolerance: float = 1e-10,
) -> LemmaReport:
    """Relative residual of the cubic interpolation-error expansion."""
    from .fields import random_polynomial

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        cell = random_cell(dim, rng)
        u = random_polynomial(dim, 3, rng)
        v = rng.uniform(-1.0, 1.0, element.n_local_dofs(dim))
        residual = element.expansion_residual(cell, u, v)
        scale = max(_pairing_scale(cell, u, v), 1e-30)
        worst = max(worst, residual / scale)
    return _report("interpolation-expansion", dim, trials, seed, tolerance, worst)


def _pairing_scale(cell: Cell, u: SmoothField, v: np.ndarray) -> float:
    """|LHS| of the expansion identity, the natural relative scale."""
    dim = cell.dim
    rule = tensor_rule(dim, 4)
    pts = element.from_reference(cell, rule.points)
    jac = float(np.prod(cell.half_lengths))
    interp = element.dof_functionals(cell, u)
    grad_u = np.asarray(u.gradient(pts), dtype=float)
    lhs = 0.0
    for i in range(dim):
        e = tuple(1 if j == i else 0 for j in range(dim))
        g = element.eval_basis_all(cell.half_lengths, rule.points, e)
        lhs += jac * float(rule.weights @ ((grad_u[:, i] - interp @ g) * (v @ g)))
    return abs(lhs)


def check_stable_decomposition(
    mesh: TensorMesh,
    trials: int = 100,
    seed: int = DEFAULT_SEED,
    tolerance: float = 1e-12,
) -> LemmaReport:
    """Per-cell slack of |grad v|^2 >= (1 - 2 theta_hat)(|grad v_X|^2 + |grad v_F|^2).

    Residual is the most negative slack over random coefficient vectors,
    negated, so pass means no cell violates the inequality beyond tolerance.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    dim = mesh.dim
    dofmap = space.build_dof_map(mesh)
    rng = np.random.default_rng(seed)
    nv = 2**dim

    groups = []
    half_all = mesh.cell_half_lengths()
    uniq, inverse = np.unique(half_all, axis=0, return_inverse=True)
    for g in range(uniq.shape[0]):
        cell = Cell(center=(0.0,) * dim, half_lengths=tuple(uniq[g]))
        a_loc = element.local_stiffness(cell)
        groups.append((np.flatnonzero(inverse == g), a_loc, theta_hat(cell)))

    min_slack = np.inf
    for _ in range(trials):
        coeffs = rng.standard_normal(dofmap.n_dofs)
        for cells, a_loc, th in groups:
            local = coeffs[dofmap.cell_dofs[cells]] * dofmap.cell_signs[cells]
            lx = local.copy()
            lx[:, nv:] = 0.0
            lf = local.copy()
            lf[:, :nv] = 0.0
            full = np.einsum("cr,rs,cs->c", local, a_loc, local)
            ex = np.einsum("cr,rs,cs->c", lx, a_loc, lx)
            ef = np.einsum("cr,rs,cs->c", lf, a_loc, lf)
            slack = full - (1.0 - 2.0 * th) * (ex + ef)
            min_slack = min(min_slack, float(slack.min()))
    return _report(
        "stable-decomposition", dim, trials, seed, tolerance, -min_slack
    )


def _consistency_residual(
    mesh: TensorMesh,
    dofmap: DofMap,
    problem: ManufacturedProblem,
    quad_points_per_axis: int = 5,
) -> tuple[np.ndarray, SparseSystem]:
    """Vector of a_h(u, phi_g) - (f, phi_g) over all global DOFs, plus the system."""
    if problem.u.gradient is None:
        raise ValueError("problem solution lacks a gradient")
    dim = mesh.dim
    system = space.assemble(mesh, dofmap, problem.f, quad_points_per_axis)
    rule = tensor_rule(dim, quad_points_per_axis)
    centers = mesh.cell_centers()
    c = np.zeros(dofmap.n_dofs)
    half_all = mesh.cell_half_lengths()
    uniq, inverse = np.unique(half_all, axis=0, return_inverse=True)
    for g in range(uniq.shape[0]):
        half = uniq[g]
        cells = np.flatnonzero(inverse == g)
        jac = float(np.prod(half))
        pts = centers[cells][:, None, :] + rule.points[None, :, :] * half[None, None, :]
        grad_u = np.asarray(problem.u.gradient(pts), dtype=float)
        contrib = np.zeros((cells.size, element.n_local_dofs(dim)))
        for k in range(dim):
            e = tuple(1 if j == k else 0 for j in range(dim))
            gk = element.eval_basis_all(half, rule.points, e)
            contrib += (grad_u[:, :, k] * rule.weights) @ gk.T
        contrib *= jac
        gd = dofmap.cell_dofs[cells]
        gs = dofmap.cell_signs[cells]
        np.add.at(c, gd.ravel(), (gs * contrib).ravel())
    return c - system.rhs, system


def _probe_classes(dofmap: DofMap) -> tuple[np.ndarray, np.ndarray]:
    """Free vertex-class and face-class DOF index sets of V_h0."""
    interior_vertices = np.setdiff1d(
        np.arange(dofmap.n_vertex_dofs), dofmap.boundary_vertex_dofs
    )
    face_dofs = np.arange(dofmap.n_vertex_dofs, dofmap.n_dofs)
    return interior_vertices, face_dofs


def consistency_probe(
    mesh: TensorMesh,
    dofmap: DofMap,
    problem: ManufacturedProblem,
    quad_points_per_axis: int = 5,
) -> tuple[float, float]:
    """Per-basis consistency errors: maxima of |a_h(u, phi) - (f, phi)| / |phi|_{1,h}.

    Returns (max over interior-vertex basis, max over face basis). Each basis
    function is normalized individually; see the module docstring for how the
    decay rate of these maxima relates to the subspace consistency rates.
    """
    residual, system = _consistency_residual(mesh, dofmap, problem, quad_points_per_axis)
    diag = system.matrix.diagonal()
    vertex_idx, face_idx = _probe_classes(dofmap)
    scaled = np.abs(residual) / np.sqrt(diag)
    max_x = float(scaled[vertex_idx].max()) if vertex_idx.size else 0.0
    max_f = float(scaled[face_idx].max()) if face_idx.size else 0.0
    return max_x, max_f


def consistency_dual_norm(
    mesh: TensorMesh,
    dofmap: DofMap,
    problem: ManufacturedProblem,
    quad_points_per_axis: int = 5,
    tol: float = 1e-12,
) -> tuple[float, float]:
    """Subspace dual norms of the consistency functional.

    For each class (interior-vertex span V^X, face span V^F) returns
    sup_{v in class} |a_h(u, v) - (f, v)| / |v|_{1,h} = sqrt(r^T A_cc^{-1} r)
    with A_cc the class-restricted stiffness block; computed by CG.
    """
    residual, system = _consistency_residual(mesh, dofmap, problem, quad_points_per_axis)
    out = []
    for idx in _probe_classes(dofmap):
        if idx.size == 0:
            out.append(0.0)
            continue
        block = system.matrix[idx][:, idx].tocsr()
        r = residual[idx]
        sub = SparseSystem(
            matrix=block,
            rhs=r,
            free_dofs=np.arange(idx.size),
            n_total=idx.size,
            constrained=True,
        )
        y, _ = cg_solve(sub, tol=tol)
        out.append(float(np.sqrt(abs(r @ y))))
    return out[0], out[1]


def check_interpolation_conformity(
    mesh: TensorMesh,
    tolerance: float = 1e-12,
) -> LemmaReport:
    """Global DOF representation matches per-cell functionals for a smooth field."""
    dofmap = space.build_dof_map(mesh)
    field = product_sine_field(mesh.dim)
    residual = space.interpolation_conformity_residual(mesh, dofmap, field)
    return _report("dof-conformity", mesh.dim, 1, DEFAULT_SEED, tolerance, residual)
