"""Global DOF numbering, assembly, and broken-space operations."""

import numpy as np
import pytest

from rectmorley import element
from rectmorley.fields import constant_field, polynomial_field, product_sine_field
from rectmorley.mesh import FaceId, build_jittered, build_uniform
from rectmorley.space import (
    DOF_ORDERING_TAG,
    FeFunction,
    apply_dirichlet,
    assemble,
    build_dof_map,
    decompose,
    evaluate,
    fefunction_from_json,
    fefunction_to_json,
    global_interpolate,
    interpolation_conformity_residual,
)

UNIT_SQUARE = ((0.0, 1.0), (0.0, 1.0))


@pytest.fixture
def mesh32():
    return build_uniform(UNIT_SQUARE, (3, 2))


@pytest.fixture
def jittered():
    return build_jittered(UNIT_SQUARE, (4, 3), amplitude=0.35, seed=21)


class TestDofMap:
    def test_counts(self, mesh32):
        dm = build_dof_map(mesh32)
        assert dm.n_vertex_dofs == 12
        assert dm.n_face_dofs == 8 + 9
        assert dm.n_dofs == 29
        assert dm.cell_dofs.shape == (6, 8)

    def test_vertex_sharing(self, mesh32):
        dm = build_dof_map(mesh32)
        # cells (0,0) and (1,0) share the vertices at x = 1/3
        left = dm.cell_dofs[mesh32.shape[1] * 0 + 0]
        right = dm.cell_dofs[mesh32.shape[1] * 1 + 0]
        # vertex order is C order over (s0, s1): (-,-),(-,+),(+,-),(+,+)
        assert left[2] == right[0]
        assert left[3] == right[1]

    def test_face_sharing_and_signs(self, mesh32):
        dm = build_dof_map(mesh32)
        left = 0  # cell (0, 0)
        right = mesh32.shape[1]  # cell (1, 0)
        # the shared axis-0 face is 'plus' for the left cell, 'minus' for the right
        gplus = dm.cell_dofs[left][4]
        gminus = dm.cell_dofs[right][5]
        assert gplus == gminus
        assert dm.cell_signs[left][4] == 1.0
        assert dm.cell_signs[right][5] == -1.0

    def test_vertex_signs_are_all_one(self, mesh32):
        dm = build_dof_map(mesh32)
        np.testing.assert_array_equal(dm.cell_signs[:, :4], 1.0)

    def test_boundary_vertices(self, mesh32):
        dm = build_dof_map(mesh32)
        # (3+1)*(2+1) vertices, interior ones are 2*1
        assert dm.boundary_vertex_dofs.size == 12 - 2

    def test_face_dof_round_trip(self, mesh32):
        dm = build_dof_map(mesh32)
        for face in mesh32.faces():
            g = dm.face_dof(face)
            assert dm.n_vertex_dofs <= g < dm.n_dofs
            assert dm.face_of_dof(g) == face

    def test_ordering_tag_is_pinned(self):
        assert DOF_ORDERING_TAG == "vertex-major/axis-major-faces/v1"


class TestInterpolation:
    def test_linear_fields_are_reproduced(self, jittered):
        dm = build_dof_map(jittered)
        u = polynomial_field({(0, 0): 0.4, (1, 0): -1.2, (0, 1): 0.8}, 2)
        fe = global_interpolate(jittered, dm, u)
        rng = np.random.default_rng(3)
        pts = rng.uniform(0.0, 1.0, (25, 2))
        for p in pts:
            assert evaluate(fe, p, (0, 0)) == pytest.approx(float(u.value(p)), abs=1e-12)

    def test_matches_local_functionals_per_cell(self, jittered):
        dm = build_dof_map(jittered)
        u = product_sine_field(2)
        assert interpolation_conformity_residual(jittered, dm, u) < 1e-13

    def test_conformity_detects_flipped_signs(self, jittered):
        import dataclasses

        dm = build_dof_map(jittered)
        bad_signs = dm.cell_signs.copy()
        bad_signs[:, 4:] *= -1.0
        bad = dataclasses.replace(dm, cell_signs=bad_signs)
        u = product_sine_field(2)
        assert interpolation_conformity_residual(jittered, bad, u) > 1e-3


class TestAssembly:
    def test_matrix_is_symmetric(self, jittered):
        dm = build_dof_map(jittered)
        system = assemble(jittered, dm, constant_field(1.0, 2))
        gap = (system.matrix - system.matrix.T).toarray()
        assert np.max(np.abs(gap)) < 1e-13

    def test_constants_are_in_the_kernel(self, jittered):
        dm = build_dof_map(jittered)
        system = assemble(jittered, dm, constant_field(1.0, 2))
        ones = np.zeros(dm.n_dofs)
        ones[: dm.n_vertex_dofs] = 1.0
        np.testing.assert_allclose(system.matrix @ ones, 0.0, atol=1e-12)

    def test_against_dense_reference_assembly(self):
        mesh = build_uniform(UNIT_SQUARE, (2, 2))
        dm = build_dof_map(mesh)
        f = product_sine_field(2)
        system = assemble(mesh, dm, f)
        dense = np.zeros((dm.n_dofs, dm.n_dofs))
        rhs = np.zeros(dm.n_dofs)
        for flat, mi in enumerate(mesh.cell_multi_indices()):
            cell = mesh.cell(mi)
            a_loc = element.local_stiffness(cell)
            b_loc = element.local_load(cell, f)
            g = dm.cell_dofs[flat]
            s = dm.cell_signs[flat]
            dense[np.ix_(g, g)] += np.outer(s, s) * a_loc
            rhs[g] += s * b_loc
        np.testing.assert_allclose(system.matrix.toarray(), dense, atol=1e-14)
        np.testing.assert_allclose(system.rhs, rhs, atol=1e-14)

    def test_apply_dirichlet_counts_and_positivity(self, mesh32):
        dm = build_dof_map(mesh32)
        system = assemble(mesh32, dm, constant_field(1.0, 2))
        constrained = apply_dirichlet(system, dm)
        assert constrained.free_dofs.size == dm.n_dofs - dm.boundary_vertex_dofs.size
        eigvals = np.linalg.eigvalsh(constrained.matrix.toarray())
        assert eigvals.min() > 0.0
        with pytest.raises(ValueError):
            apply_dirichlet(constrained, dm)


class TestFeFunction:
    def test_coefficient_length_is_validated(self, mesh32):
        dm = build_dof_map(mesh32)
        with pytest.raises(ValueError):
            FeFunction(mesh32, dm, np.zeros(dm.n_dofs - 1))

    def test_evaluate_inside_cells(self, jittered):
        dm = build_dof_map(jittered)
        rng = np.random.default_rng(5)
        fe = FeFunction(jittered, dm, rng.standard_normal(dm.n_dofs))
        mi = (1, 1)
        cell = jittered.cell(mi)
        flat = int(np.ravel_multi_index(mi, jittered.shape))
        local = fe.local_coefficients(flat)
        p = np.asarray(cell.center) + 0.3 * np.asarray(cell.half_lengths)
        for deriv in [(0, 0), (1, 0), (0, 1)]:
            direct = element.evaluate_local(cell, local, p, deriv)
            assert evaluate(fe, p, deriv) == pytest.approx(float(direct), abs=1e-13)

    def test_json_round_trip(self, jittered):
        dm = build_dof_map(jittered)
        rng = np.random.default_rng(6)
        fe = FeFunction(jittered, dm, rng.standard_normal(dm.n_dofs))
        doc = fefunction_to_json(fe)
        clone = fefunction_from_json(doc)
        np.testing.assert_allclose(clone.coefficients, fe.coefficients, atol=0)
        assert clone.mesh.shape == jittered.shape

    def test_json_rejects_foreign_ordering(self, jittered):
        dm = build_dof_map(jittered)
        fe = FeFunction(jittered, dm, np.zeros(dm.n_dofs))
        doc = fefunction_to_json(fe)
        doc["dof_ordering"] = "something-else"
        with pytest.raises(ValueError):
            fefunction_from_json(doc)


class TestDecompose:
    def test_parts_sum_to_whole(self, jittered):
        dm = build_dof_map(jittered)
        rng = np.random.default_rng(7)
        fe = FeFunction(jittered, dm, rng.standard_normal(dm.n_dofs))
        v_x, v_f, per_face = decompose(fe)
        np.testing.assert_allclose(
            v_x.coefficients + v_f.coefficients, fe.coefficients, atol=0
        )
        assert np.all(v_x.coefficients[dm.n_vertex_dofs :] == 0.0)
        assert np.all(v_f.coefficients[: dm.n_vertex_dofs] == 0.0)

    def test_per_face_view_is_lazy_and_complete(self, jittered):
        dm = build_dof_map(jittered)
        rng = np.random.default_rng(8)
        fe = FeFunction(jittered, dm, rng.standard_normal(dm.n_dofs))
        _, v_f, per_face = decompose(fe)
        faces = list(per_face)
        assert len(per_face) == dm.n_face_dofs
        assert faces == list(jittered.faces())
        # single-face parts sum to the face component at a sample point
        p = (0.4, 0.6)
        total = sum(evaluate(per_face[f], p, (0, 0)) for f in faces)
        assert total == pytest.approx(evaluate(v_f, p, (0, 0)), abs=1e-12)

    def test_single_face_function_has_one_active_dof(self, jittered):
        dm = build_dof_map(jittered)
        fe = FeFunction(jittered, dm, np.ones(dm.n_dofs))
        _, _, per_face = decompose(fe)
        face = FaceId(axis=0, layer=1, cross_index=(1,))
        part = per_face[face]
        active = np.flatnonzero(part.coefficients)
        assert active.tolist() == [dm.face_dof(face)]
