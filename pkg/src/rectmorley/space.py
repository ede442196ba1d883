"""Global nonconforming space: DOF map with orientation signs, interpolation,
assembly, Dirichlet constraints, decompositions, and point evaluation.

Global numbering is vertex-major: vertex DOFs first (lexicographic over the
vertex grid), then face DOFs grouped axis-major, each axis's faces in C order
over its face grid. Face DOFs store the face-averaged normal derivative with
respect to the fixed positive-axis global normal; a per-cell sign (+1 on the
local xi_j = +1 face, -1 on the xi_j = -1 face) reconciles this with the
element's outward-normal functionals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from . import element
from .fields import SmoothField
from .mesh import Cell, FaceId, TensorMesh, mesh_from_spec, mesh_to_spec
from .quadrature import tensor_rule

DOF_ORDERING_TAG = "vertex-major/axis-major-faces/v1"


@dataclass(frozen=True)
class DofMap:
    """Cell-to-global DOF map with orientation signs.

    cell_dofs[c, r] is the global index of local DOF r of flat cell c;
    cell_signs[c, r] the matching sign. Local order is the element order:
    vertices then faces F_1..F_{2d}. Flat cell order is C order over the
    cell grid.
    """

    mesh: TensorMesh
    n_vertex_dofs: int
    n_face_dofs: int
    cell_dofs: np.ndarray
    cell_signs: np.ndarray
    boundary_vertex_dofs: np.ndarray
    face_offsets: tuple[int, ...]

    @property
    def n_dofs(self) -> int:
        return self.n_vertex_dofs + self.n_face_dofs

    def vertex_dof(self, multi_index: Sequence[int]) -> int:
        shape = tuple(s + 1 for s in self.mesh.shape)
        return int(np.ravel_multi_index(tuple(int(m) for m in multi_index), shape))

    def face_dof(self, face: FaceId) -> int:
        self.mesh._check_face(face)
        grid = self.mesh.face_grid_shape(face.axis)
        multi = list(face.cross_index)
        multi.insert(face.axis, face.layer)
        return self.face_offsets[face.axis] + int(np.ravel_multi_index(tuple(multi), grid))

    def face_of_dof(self, gdof: int) -> FaceId:
        if not self.n_vertex_dofs <= gdof < self.n_dofs:
            raise ValueError(f"global index {gdof} is not a face DOF")
        axis = int(np.searchsorted(self.face_offsets, gdof, side="right")) - 1
        grid = self.mesh.face_grid_shape(axis)
        multi = np.unravel_index(gdof - self.face_offsets[axis], grid)
        cross = tuple(int(m) for k, m in enumerate(multi) if k != axis)
        return FaceId(axis=axis, layer=int(multi[axis]), cross_index=cross)


def build_dof_map(mesh: TensorMesh) -> DofMap:
    dim = mesh.dim
    shape = mesh.shape
    vshape = tuple(s + 1 for s in shape)
    n_vertex = int(np.prod(vshape))
    face_counts = [int(np.prod(mesh.face_grid_shape(j))) for j in range(dim)]
    face_offsets = [n_vertex]
    for c in face_counts[:-1]:
        face_offsets.append(face_offsets[-1] + c)
    n_face = int(sum(face_counts))

    mi = mesh.cell_multi_indices()
    n_cells = mi.shape[0]
    nloc = element.n_local_dofs(dim)
    cell_dofs = np.empty((n_cells, nloc), dtype=np.int64)
    cell_signs = np.ones((n_cells, nloc))

    signs = element.vertex_signs(dim)
    for i in range(2**dim):
        bits = ((signs[i] + 1) / 2).astype(np.int64)
        cell_dofs[:, i] = np.ravel_multi_index(tuple((mi + bits).T), vshape)
    for m, (axis, side) in enumerate(element.local_faces(dim)):
        fmulti = mi.copy()
        if side == 1:
            fmulti[:, axis] += 1
        grid = mesh.face_grid_shape(axis)
        cell_dofs[:, 2**dim + m] = face_offsets[axis] + np.ravel_multi_index(
            tuple(fmulti.T), grid
        )
        cell_signs[:, 2**dim + m] = float(side)

    vmulti = np.stack(np.meshgrid(*[np.arange(s) for s in vshape], indexing="ij"), axis=-1)
    vmulti = vmulti.reshape(-1, dim)
    on_boundary = np.zeros(n_vertex, dtype=bool)
    for j in range(dim):
        on_boundary |= (vmulti[:, j] == 0) | (vmulti[:, j] == shape[j])
    boundary_vertex_dofs = np.flatnonzero(on_boundary)

    cell_dofs.setflags(write=False)
    cell_signs.setflags(write=False)
    boundary_vertex_dofs.setflags(write=False)
    return DofMap(
        mesh=mesh,
        n_vertex_dofs=n_vertex,
        n_face_dofs=n_face,
        cell_dofs=cell_dofs,
        cell_signs=cell_signs,
        boundary_vertex_dofs=boundary_vertex_dofs,
        face_offsets=tuple(face_offsets),
    )


@dataclass
class FeFunction:
    """Global Morley function: shared-DOF coefficient vector on a mesh."""

    mesh: TensorMesh
    dofmap: DofMap
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.dofmap.n_dofs,):
            raise ValueError(
                f"coefficient vector must have length {self.dofmap.n_dofs}, "
                f"got {self.coefficients.shape}"
            )

    def local_coefficients(self, flat_cell: int) -> np.ndarray:
        """Signed local coefficient vector of one cell (element basis order)."""
        return (
            self.coefficients[self.dofmap.cell_dofs[flat_cell]]
            * self.dofmap.cell_signs[flat_cell]
        )


def fefunction_to_json(fefun: FeFunction) -> dict:
    return {
        "mesh": mesh_to_spec(fefun.mesh),
        "coefficients": [float(c) for c in fefun.coefficients],
        "dof_ordering": DOF_ORDERING_TAG,
    }


def fefunction_from_json(doc: dict) -> FeFunction:
    if doc.get("dof_ordering") != DOF_ORDERING_TAG:
        raise ValueError(f"unsupported dof ordering {doc.get('dof_ordering')!r}")
    mesh = mesh_from_spec(doc["mesh"])
    dofmap = build_dof_map(mesh)
    return FeFunction(mesh=mesh, dofmap=dofmap, coefficients=np.asarray(doc["coefficients"]))


def _cell_groups(mesh: TensorMesh) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (half_lengths, flat cell indices) for cells sharing a size."""
    half = mesh.cell_half_lengths()
    uniq, inverse = np.unique(half, axis=0, return_inverse=True)
    for g in range(uniq.shape[0]):
        yield uniq[g], np.flatnonzero(inverse == g)


def global_interpolate(
    mesh: TensorMesh, dofmap: DofMap, field: SmoothField, face_points_per_axis: int = 4
) -> FeFunction:
    """Interpolant with each global DOF functional evaluated once."""
    if field.gradient is None:
        raise ValueError("global interpolation needs a field gradient")
    dim = mesh.dim
    coeffs = np.empty(dofmap.n_dofs)

    vgrids = np.meshgrid(*[mesh.breakpoints(j) for j in range(dim)], indexing="ij")
    vpts = np.stack([g.ravel() for g in vgrids], axis=-1)
    coeffs[: dofmap.n_vertex_dofs] = np.asarray(field.value(vpts), dtype=float)

    rule = tensor_rule(dim - 1, face_points_per_axis)
    for j in range(dim):
        axes_coords = []
        for k in range(dim):
            if k == j:
                axes_coords.append(mesh.breakpoints(j))
            else:
                axes_coords.append(mesh.axis_centers(k))
        grids = np.meshgrid(*axes_coords, indexing="ij")
        centers = np.stack([g.ravel() for g in grids], axis=-1)

        half_coords = []
        for k in range(dim):
            if k == j:
                half_coords.append(np.zeros_like(mesh.breakpoints(j)))
            else:
                half_coords.append(mesh.axis_half_lengths(k))
        hgrids = np.meshgrid(*half_coords, indexing="ij")
        halves = np.stack([g.ravel() for g in hgrids], axis=-1)

        xi_embedded = np.zeros((rule.points.shape[0], dim))
        cols = [k for k in range(dim) if k != j]
        xi_embedded[:, cols] = rule.points
        pts = centers[:, None, :] + xi_embedded[None, :, :] * halves[:, None, :]
        grad = np.asarray(field.gradient(pts), dtype=float)
        avg = (grad[:, :, j] @ rule.weights) / 2 ** (dim - 1)
        lo = dofmap.face_offsets[j]
        coeffs[lo : lo + centers.shape[0]] = avg
    return FeFunction(mesh=mesh, dofmap=dofmap, coefficients=coeffs)


@dataclass(frozen=True)
class SparseSystem:
    """Symmetric sparse system over the currently free DOFs.

    free_dofs maps row/column positions to global DOF indices; n_total is the
    full DOF count so solutions can be scattered back.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free_dofs: np.ndarray
    n_total: int
    constrained: bool = False


def assemble(
    mesh: TensorMesh, dofmap: DofMap, f: SmoothField, quad_points_per_axis: int = 5
) -> SparseSystem:
    """Unconstrained stiffness matrix and load vector of the broken form."""
    dim = mesh.dim
    nloc = element.n_local_dofs(dim)
    n = dofmap.n_dofs
    rule = tensor_rule(dim, quad_points_per_axis)
    centers = mesh.cell_centers()

    matrix = sp.csr_matrix((n, n))
    rhs = np.zeros(n)
    for half, cells in _cell_groups(mesh):
        cell = Cell(center=tuple(np.zeros(dim)), half_lengths=tuple(half))
        a_loc = element.local_stiffness(cell)
        gd = dofmap.cell_dofs[cells]
        gs = dofmap.cell_signs[cells]
        data = gs[:, :, None] * gs[:, None, :] * a_loc[None, :, :]
        rows = np.broadcast_to(gd[:, :, None], data.shape)
        cols = np.broadcast_to(gd[:, None, :], data.shape)
        matrix = matrix + sp.coo_matrix(
            (data.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)
        ).tocsr()

        jac = float(np.prod(half))
        v0 = element.eval_basis_all(half, rule.points, (0,) * dim)
        pts = centers[cells][:, None, :] + rule.points[None, :, :] * half[None, None, :]
        fvals = np.asarray(f.value(pts), dtype=float)
        b_loc = jac * (fvals * rule.weights) @ v0.T
        np.add.at(rhs, gd.ravel(), (gs * b_loc).ravel())

    matrix.sum_duplicates()
    return SparseSystem(
        matrix=matrix,
        rhs=rhs,
        free_dofs=np.arange(n),
        n_total=n,
        constrained=False,
    )


def apply_dirichlet(system: SparseSystem, dofmap: DofMap) -> SparseSystem:
    """Eliminate boundary VERTEX rows/columns; all face DOFs stay free."""
    if system.constrained:
        raise ValueError("system is already constrained")
    free = np.setdiff1d(system.free_dofs, dofmap.boundary_vertex_dofs)
    matrix = system.matrix[free][:, free].tocsr()
    return SparseSystem(
        matrix=matrix,
        rhs=system.rhs[free],
        free_dofs=free,
        n_total=system.n_total,
        constrained=True,
    )


class _PerFaceView(Mapping):
    """Lazy face -> FeFunction map backing decompose(); built on demand."""

    def __init__(self, fefun: FeFunction):
        self._fefun = fefun

    def __getitem__(self, face: FaceId) -> FeFunction:
        gdof = self._fefun.dofmap.face_dof(face)
        coeffs = np.zeros(self._fefun.dofmap.n_dofs)
        coeffs[gdof] = self._fefun.coefficients[gdof]
        return FeFunction(self._fefun.mesh, self._fefun.dofmap, coeffs)

    def __iter__(self) -> Iterator[FaceId]:
        return self._fefun.mesh.faces()

    def __len__(self) -> int:
        return self._fefun.dofmap.n_face_dofs


def decompose(fefun: FeFunction) -> tuple[FeFunction, FeFunction, Mapping]:
    """Split into the vertex part, the face part, and single-face pieces."""
    nv = fefun.dofmap.n_vertex_dofs
    cx = fefun.coefficients.copy()
    cx[nv:] = 0.0
    cf = fefun.coefficients.copy()
    cf[:nv] = 0.0
    v_x = FeFunction(fefun.mesh, fefun.dofmap, cx)
    v_f = FeFunction(fefun.mesh, fefun.dofmap, cf)
    return v_x, v_f, _PerFaceView(v_f)


def evaluate(
    fefun: FeFunction, point: Sequence[float], deriv: Sequence[int] | None = None
) -> float:
    """Evaluate at a point; shared-face points resolve to the smaller multi-index cell."""
    mesh = fefun.mesh
    if deriv is None:
        deriv = (0,) * mesh.dim
    if sum(int(m) for m in deriv) > 3:
        raise ValueError("derivative order exceeds 3")
    multi = mesh.locate(point)
    flat = int(np.ravel_multi_index(multi, mesh.shape))
    cell = mesh.cell(multi)
    return float(
        element.evaluate_local(
            cell, fefun.local_coefficients(flat), np.asarray(point, dtype=float), deriv
        )
    )


def interpolation_conformity_residual(
    mesh: TensorMesh, dofmap: DofMap, field: SmoothField
) -> float:
    """Max mismatch between per-cell DOF functionals and gathered global coefficients.

    Zero (to roundoff) certifies that the sign convention glues each shared
    face DOF consistently between its two cells.
    """
    fefun = global_interpolate(mesh, dofmap, field)
    worst = 0.0
    for flat, multi in enumerate(np.ndindex(*mesh.shape)):
        cell = mesh.cell(multi)
        local = element.dof_functionals(cell, field)
        worst = max(worst, float(np.max(np.abs(local - fefun.local_coefficients(flat)))))
    return worst
