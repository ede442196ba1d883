"""Rectangular Morley nonconforming finite elements on d-dimensional box meshes."""

from .mesh import (
    AxisPartition,
    Cell,
    FaceId,
    TensorMesh,
    build_divisionally_uniform,
    build_explicit,
    build_jittered,
    build_pattern,
    build_uniform,
    is_uniform_patch,
    load_mesh,
    mesh_from_spec,
    mesh_size,
    mesh_to_spec,
)
from .fields import (
    SmoothField,
    constant_field,
    coordinate_field,
    polynomial_field,
    product_bubble_field,
    product_sine_field,
    random_polynomial,
)
from .quadrature import QuadratureRule, face_rule, tensor_rule
from .element import (
    LocalBasisIndex,
    dof_functionals,
    dof_matrix,
    eval_basis,
    expansion_residual,
    local_interpolate,
    local_load,
    local_q1_interpolate,
    local_stiffness,
    n_local_dofs,
)
from .space import (
    DOF_ORDERING_TAG,
    DofMap,
    FeFunction,
    SparseSystem,
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
from .solver import SolveReport, cg_solve
from .analysis import (
    ConvergenceRecord,
    ManufacturedProblem,
    RateEstimate,
    broken_h1_error,
    estimate_rate,
    l2_error,
    make_problem,
    problem_by_name,
    records_to_csv,
    records_to_json,
    run_study,
    solve_poisson,
    superclose_pairing,
)
from .lemmas import (
    LemmaReport,
    PatchSpec,
    ThetaEstimate,
    check_cell_orthogonality,
    check_expansion_identity,
    check_interpolation_conformity,
    check_patch_orthogonality,
    check_stable_decomposition,
    check_theta,
    check_unisolvence,
    compute_theta,
    consistency_dual_norm,
    consistency_probe,
    theta_hat,
)

__version__ = "0.1.0"
