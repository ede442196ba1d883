"""Cell-local Morley-rectangle mathematics.

The shape space on a box K is Q_1(K) + span{x_i^2, x_i^3 : 1 <= i <= d}.
Degrees of freedom are the 2^d vertex values followed by the 2d face averages
of the outward normal derivative; faces are ordered F_1..F_{2d} with F_{2k-1}
the xi_k = +1 face and F_{2k} the xi_k = -1 face. The explicit dual basis is

    p_i = 2^{-(d+1)} (2 prod_j (1 + s_ij xi_j) - sum_j s_ij xi_j (xi_j^2 - 1)),
    q_{2k-1} = (h_k/4)(xi_k + 1)^2 (xi_k - 1),
    q_{2k}   = -(h_k/4)(xi_k + 1)(xi_k - 1)^2,

in the reference coordinates xi_j = (x_j - x_{j,c}) / h_j of the cell. The
outward normal convention is forced by duality: it is the unique orientation
for which the face functionals of q_j produce the Kronecker pattern.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .fields import SmoothField
from .mesh import Cell
from .quadrature import face_rule, tensor_rule


@dataclass(frozen=True)
class LocalBasisIndex:
    """One local basis function: kind 'vertex' (index 1..2^d) or 'face' (1..2d)."""

    kind: str
    index: int

    def __post_init__(self) -> None:
        if self.kind not in ("vertex", "face"):
            raise ValueError(f"kind must be 'vertex' or 'face', got {self.kind!r}")
        if self.index < 1:
            raise ValueError("local basis indices are 1-based")


def n_local_dofs(dim: int) -> int:
    return 2**dim + 2 * dim


@lru_cache(maxsize=None)
def vertex_signs(dim: int) -> np.ndarray:
    """(2^dim, dim) array of vertex sign vectors, lexicographic by multi-index."""
    s = np.empty((2**dim, dim))
    for i in range(2**dim):
        for j in range(dim):
            s[i, j] = 1.0 if (i >> (dim - 1 - j)) & 1 else -1.0
    s.setflags(write=False)
    return s


def _cubic_term(x: np.ndarray, m: int) -> np.ndarray:
    # derivatives of B(t) = t^3 - t
    if m == 0:
        return x**3 - x
    if m == 1:
        return 3.0 * x**2 - 1.0
    if m == 2:
        return 6.0 * x
    return np.full_like(x, 6.0)


def _face_profile_plus(x: np.ndarray, m: int) -> np.ndarray:
    # derivatives of (t+1)^2 (t-1) = t^3 + t^2 - t - 1
    if m == 0:
        return (x + 1.0) ** 2 * (x - 1.0)
    if m == 1:
        return 3.0 * x**2 + 2.0 * x - 1.0
    if m == 2:
        return 6.0 * x + 2.0
    return np.full_like(x, 6.0)


def _face_profile_minus(x: np.ndarray, m: int) -> np.ndarray:
    # derivatives of (t+1)(t-1)^2 = t^3 - t^2 - t + 1
    if m == 0:
        return (x + 1.0) * (x - 1.0) ** 2
    if m == 1:
        return 3.0 * x**2 - 2.0 * x - 1.0
    if m == 2:
        return 6.0 * x - 2.0
    return np.full_like(x, 6.0)


def eval_basis_all(
    half_lengths: Sequence[float], xi: np.ndarray, deriv: Sequence[int]
) -> np.ndarray:
    """Physical derivatives of every local basis function at reference points.

    Parameters
    ----------
    half_lengths : d positive reals of the cell.
    xi : (n, d) reference points.
    deriv : derivative multi-index, entries summing to at most 3.

    Returns
    -------
    (2^d + 2d, n) array; row r holds d^deriv phi_r / dx^deriv, including the
    1/h_j chain factors of the affine map.
    """
    half = np.asarray(half_lengths, dtype=float)
    dim = half.shape[0]
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 1:
        xi = xi[None, :]
    deriv = tuple(int(m) for m in deriv)
    if len(deriv) != dim:
        raise ValueError(f"deriv must have {dim} entries, got {len(deriv)}")
    if any(m < 0 for m in deriv):
        raise ValueError("deriv entries must be nonnegative")
    if sum(deriv) > 3:
        raise ValueError(f"derivative order {sum(deriv)} exceeds 3")

    n = xi.shape[0]
    nv = 2**dim
    signs = vertex_signs(dim)
    out = np.zeros((nv + 2 * dim, n))

    # vertex functions: 2^{-(d+1)} (2 prod_j A_j - sum_j s_j B(xi_j))
    if all(m <= 1 for m in deriv):
        prod = np.full((nv, n), 2.0)
        for j in range(dim):
            if deriv[j] == 0:
                prod = prod * (1.0 + signs[:, j : j + 1] * xi[None, :, j].repeat(nv, 0))
            else:
                prod = prod * signs[:, j : j + 1]
    else:
        prod = np.zeros((nv, n))
    nonzero_axes = [j for j in range(dim) if deriv[j] > 0]
    if not nonzero_axes:
        cubic = np.zeros((nv, n))
        for j in range(dim):
            cubic += signs[:, j : j + 1] * _cubic_term(xi[:, j], 0)[None, :]
    elif len(nonzero_axes) == 1:
        t = nonzero_axes[0]
        cubic = signs[:, t : t + 1] * _cubic_term(xi[:, t], deriv[t])[None, :]
    else:
        cubic = np.zeros((nv, n))
    out[:nv] = (prod - cubic) / 2 ** (dim + 1)

    # face functions: q depends on one coordinate only
    for k in range(dim):
        if any(deriv[j] > 0 for j in range(dim) if j != k):
            continue
        m = deriv[k]
        out[nv + 2 * k] = (half[k] / 4.0) * _face_profile_plus(xi[:, k], m)
        out[nv + 2 * k + 1] = -(half[k] / 4.0) * _face_profile_minus(xi[:, k], m)

    scale = 1.0
    for j in range(dim):
        if deriv[j]:
            scale /= half[j] ** deriv[j]
    if scale != 1.0:
        out *= scale
    return out


def _flat_index(dim: int, idx: LocalBasisIndex) -> int:
    nv = 2**dim
    if idx.kind == "vertex":
        if idx.index > nv:
            raise ValueError(f"vertex index {idx.index} out of range for dim {dim}")
        return idx.index - 1
    if idx.index > 2 * dim:
        raise ValueError(f"face index {idx.index} out of range for dim {dim}")
    return nv + idx.index - 1


def to_reference(cell: Cell, points: np.ndarray) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    c = np.asarray(cell.center)
    h = np.asarray(cell.half_lengths)
    return (x - c) / h


def from_reference(cell: Cell, xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    c = np.asarray(cell.center)
    h = np.asarray(cell.half_lengths)
    return c + xi * h


def eval_basis(
    cell: Cell,
    idx: LocalBasisIndex,
    point: Sequence[float],
    deriv: Sequence[int] | None = None,
) -> float:
    """d^deriv of one local basis function at a physical point of the cell."""
    dim = cell.dim
    if deriv is None:
        deriv = (0,) * dim
    xi = to_reference(cell, np.asarray(point, dtype=float))
    if np.any(np.abs(xi) > 1.0 + 1e-9):
        raise ValueError(f"point {tuple(point)} lies outside the cell")
    row = _flat_index(dim, idx)
    return float(eval_basis_all(cell.half_lengths, xi[None, :], deriv)[row, 0])


def local_faces(dim: int) -> list[tuple[int, int]]:
    """(axis, side) for local faces F_1..F_{2d}; side +1 is the xi_axis = +1 face."""
    out = []
    for k in range(dim):
        out.append((k, 1))
        out.append((k, -1))
    return out


def dof_functionals(
    cell: Cell, field: SmoothField, face_points_per_axis: int = 4
) -> np.ndarray:
    """Vertex values followed by face averages of the outward normal derivative."""
    dim = cell.dim
    if field.gradient is None:
        raise ValueError("field must provide a gradient for face functionals")
    nv = 2**dim
    out = np.empty(n_local_dofs(dim))
    verts = from_reference(cell, vertex_signs(dim))
    out[:nv] = np.asarray(field.value(verts), dtype=float)
    for m, (axis, side) in enumerate(local_faces(dim)):
        rule = face_rule(dim, axis, side, face_points_per_axis)
        pts = from_reference(cell, rule.points)
        grad = np.asarray(field.gradient(pts), dtype=float)
        # outward normal is side * e_axis
        out[nv + m] = side * float(grad[:, axis] @ rule.weights) / 2 ** (dim - 1)
    return out


def local_interpolate(
    cell: Cell, field: SmoothField, face_points_per_axis: int = 4
) -> np.ndarray:
    """Coefficients of the local interpolant; equal to the DOF functionals by duality."""
    return dof_functionals(cell, field, face_points_per_axis)


def dof_matrix(cell: Cell, face_points_per_axis: int = 4) -> np.ndarray:
    """Unisolvence matrix D[r, s] = r-th DOF functional applied to basis function s."""
    dim = cell.dim
    nloc = n_local_dofs(dim)
    nv = 2**dim
    D = np.empty((nloc, nloc))
    vert_xi = vertex_signs(dim)
    D[:nv, :] = eval_basis_all(cell.half_lengths, vert_xi, (0,) * dim).T
    for m, (axis, side) in enumerate(local_faces(dim)):
        rule = face_rule(dim, axis, side, face_points_per_axis)
        e = tuple(1 if j == axis else 0 for j in range(dim))
        grads = eval_basis_all(cell.half_lengths, rule.points, e)
        D[nv + m, :] = side * (grads @ rule.weights) / 2 ** (dim - 1)
    return D


class Q1Interpolant:
    """Multilinear interpolant through the 2^d vertex values of a cell."""

    def __init__(self, cell: Cell, vertex_values: np.ndarray):
        self.cell = cell
        self.vertex_values = np.asarray(vertex_values, dtype=float)
        if self.vertex_values.shape != (2**cell.dim,):
            raise ValueError("need one value per vertex")

    def value(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        squeeze = pts.ndim == 1
        if squeeze:
            pts = pts[None, :]
        xi = to_reference(self.cell, pts)
        signs = vertex_signs(self.cell.dim)
        hat = np.ones((signs.shape[0], pts.shape[0]))
        for j in range(self.cell.dim):
            hat *= 0.5 * (1.0 + signs[:, j : j + 1] * xi[None, :, j])
        out = self.vertex_values @ hat
        return float(out[0]) if squeeze else out


def local_q1_interpolate(cell: Cell, field: SmoothField) -> Q1Interpolant:
    verts = from_reference(cell, vertex_signs(cell.dim))
    return Q1Interpolant(cell, np.asarray(field.value(verts), dtype=float))


def local_stiffness(cell: Cell, points_per_axis: int = 3) -> np.ndarray:
    """(grad phi_r, grad phi_s)_K with an exact tensor Gauss rule."""
    dim = cell.dim
    rule = tensor_rule(dim, points_per_axis)
    jac = float(np.prod(cell.half_lengths))
    A = np.zeros((n_local_dofs(dim), n_local_dofs(dim)))
    for k in range(dim):
        e = tuple(1 if j == k else 0 for j in range(dim))
        G = eval_basis_all(cell.half_lengths, rule.points, e)
        A += (G * rule.weights) @ G.T
    A *= jac
    return 0.5 * (A + A.T)


def local_load(cell: Cell, f: SmoothField, quad_points_per_axis: int = 5) -> np.ndarray:
    """int_K f phi_r dx by tensor Gauss quadrature."""
    dim = cell.dim
    rule = tensor_rule(dim, quad_points_per_axis)
    pts = from_reference(cell, rule.points)
    vals = np.asarray(f.value(pts), dtype=float)
    V = eval_basis_all(cell.half_lengths, rule.points, (0,) * dim)
    return float(np.prod(cell.half_lengths)) * (V @ (rule.weights * vals))


def evaluate_local(
    cell: Cell, coeffs: np.ndarray, points: np.ndarray, deriv: Sequence[int] | None = None
) -> np.ndarray:
    """Evaluate a local Morley function sum_r coeffs[r] phi_r at physical points."""
    dim = cell.dim
    if deriv is None:
        deriv = (0,) * dim
    pts = np.asarray(points, dtype=float)
    squeeze = pts.ndim == 1
    if squeeze:
        pts = pts[None, :]
    xi = to_reference(cell, pts)
    out = np.asarray(coeffs, dtype=float) @ eval_basis_all(cell.half_lengths, xi, deriv)
    return float(out[0]) if squeeze else out


def expansion_residual(cell: Cell, u: SmoothField, v: np.ndarray) -> float:
    """Residual of the exact interpolation-error expansion for cubic u.

    For u in P_3(K) and a local Morley function v the pairing
    (grad(u - Pi_K u), grad v)_K equals

        sum_{i != j} [ -(h_j^2/3) int_K u_ijj dv/dx_i
                       + (h_i^2 h_j^2 / 45) int_K u_ijj d^3v/dx_i^3 ],

    with u_ijj = d^3 u / dx_i dx_j^2. Both sides are computed with
    exact-degree quadrature; the absolute difference is returned.
    """
    dim = cell.dim
    if u.gradient is None or u.mixed_third is None:
        raise ValueError("u must provide gradient and mixed third derivatives")
    v = np.asarray(v, dtype=float)
    rule = tensor_rule(dim, 4)
    pts = from_reference(cell, rule.points)
    jac = float(np.prod(cell.half_lengths))
    w = rule.weights

    interp = dof_functionals(cell, u)
    grad_u = np.asarray(u.gradient(pts), dtype=float)
    thirds = np.asarray(u.mixed_third(pts), dtype=float)
    h = np.asarray(cell.half_lengths)

    lhs = 0.0
    rhs = 0.0
    v_first = {}
    for i in range(dim):
        e = tuple(1 if j == i else 0 for j in range(dim))
        G = eval_basis_all(cell.half_lengths, rule.points, e)
        v_first[i] = v @ G
        lhs += jac * float(w @ ((grad_u[:, i] - interp @ G) * v_first[i]))
    for i in range(dim):
        e3 = tuple(3 if j == i else 0 for j in range(dim))
        v_third = v @ eval_basis_all(cell.half_lengths, rule.points, e3)
        for j in range(dim):
            if j == i:
                continue
            uijj = thirds[:, i, j]
            rhs -= (h[j] ** 2 / 3.0) * jac * float(w @ (uijj * v_first[i]))
            rhs += (h[i] ** 2 * h[j] ** 2 / 45.0) * jac * float(w @ (uijj * v_third))
    return abs(lhs - rhs)
