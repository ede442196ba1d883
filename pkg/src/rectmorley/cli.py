"""Command-line interface for the rectangular Morley solver.

Three subcommands share one executable:

``solve``
    One Poisson solve on a mesh described by the mesh grammar; emits a JSON
    result with errors, DOF count, and the solver report.
``study``
    A convergence study over a sequence of refinement levels; emits the
    error-analysis CSV (and optionally the same records as JSON).
``verify``
    Seeded numerical certification of the element's structural identities
    (unisolvence, boundary orthogonality, patch orthogonality, strengthened
    Cauchy-Schwarz constants, the interpolation-error expansion, the stable
    decomposition, and global DOF conformity); emits one JSON report entry
    per identity per dimension.

Mesh grammar
------------
``uniform:N`` | ``divisional:split=S,counts=A:B`` | ``pattern:R1-R2,level=L``
| ``file:PATH``.  For ``study`` the resolution slot is supplied by
``--levels`` instead: ``uniform`` (levels are cell counts per axis),
``pattern:R1-R2`` (levels are pattern repetition depths), and
``divisional:split=S,counts=A:B`` (levels multiply the per-block counts).

Exit codes: 0 success; 1 verification failure; 2 invalid configuration;
3 solver non-convergence.  The environment variable MORLEY_THREADS caps the
number of worker threads used for independent verification tasks.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import analysis, lemmas, mesh
from .mesh import TensorMesh

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INVALID_CONFIG = 2
EXIT_NO_CONVERGENCE = 3


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one CLI run."""

    command: str
    dim: int = 2
    mesh_spec: str = "uniform:8"
    problem: str = "sinsin"
    domain: tuple[float, float] = (0.0, 1.0)
    levels: tuple[float, ...] = ()
    quad_points_per_axis: int = 5
    tol: float = 1e-12
    trials: int = 100
    seed: int = lemmas.DEFAULT_SEED
    dims: tuple[int, ...] = (2, 3)
    output: str | None = None
    csv_path: str | None = None
    json_path: str | None = None

    def to_json(self) -> dict:
        doc = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in doc.items()}


def _parse_kv(text: str, expected: Sequence[str]) -> dict[str, str]:
    params: dict[str, str] = {}
    for item in filter(None, text.split(",")):
        key, sep, value = item.partition("=")
        if not sep or key not in expected:
            raise ValueError(f"unexpected mesh parameter {item!r}")
        params[key] = value
    missing = [k for k in expected if k not in params]
    if missing:
        raise ValueError(f"missing mesh parameter(s): {', '.join(missing)}")
    return params


def _domain_box(config_domain: tuple[float, float], dim: int) -> tuple[tuple[float, float], ...]:
    lo, hi = config_domain
    if not lo < hi:
        raise ValueError(f"domain must satisfy lo < hi, got {config_domain}")
    return ((lo, hi),) * dim


def _divisional_parts(
    rest: str, domain: tuple[float, float]
) -> tuple[tuple[float, ...], tuple[int, ...]]:
    params = _parse_kv(rest, ("split", "counts"))
    splits = tuple(float(s) for s in params["split"].split(":"))
    counts = tuple(int(c) for c in params["counts"].split(":"))
    if any(not 0.0 < s < 1.0 for s in splits):
        raise ValueError("divisional split points must lie strictly inside (0, 1)")
    if list(splits) != sorted(set(splits)):
        raise ValueError("divisional split points must be strictly increasing")
    if len(counts) != len(splits) + 1:
        raise ValueError("divisional counts must list one entry per block")
    if any(c < 1 for c in counts):
        raise ValueError("divisional block counts must be positive")
    lo, hi = domain
    breaks = tuple(lo + s * (hi - lo) for s in splits)
    return breaks, counts


def _pattern_ratios(text: str) -> tuple[float, ...]:
    ratios = tuple(float(r) for r in text.split("-"))
    if len(ratios) < 2:
        raise ValueError("pattern needs at least two ratio entries, e.g. 1-4")
    return ratios


def parse_mesh_spec(spec: str, dim: int, domain: tuple[float, float]) -> TensorMesh:
    """Build the mesh described by a grammar string (for one solve)."""
    family, _, rest = spec.partition(":")
    box = _domain_box(domain, dim)
    if family == "uniform":
        n = int(rest)
        if n < 1:
            raise ValueError(f"uniform mesh needs a positive cell count, got {n}")
        return mesh.build_uniform(box, (n,) * dim)
    if family == "divisional":
        breaks, counts = _divisional_parts(rest, domain)
        return mesh.build_divisionally_uniform(box, (breaks,) * dim, (counts,) * dim)
    if family == "pattern":
        ratio_part, _, kv = rest.partition(",")
        params = _parse_kv(kv, ("level",))
        return mesh.build_pattern(box, _pattern_ratios(ratio_part), int(params["level"]))
    if family == "file":
        loaded = mesh.load_mesh(rest)
        if loaded.dim != dim:
            raise ValueError(f"mesh file has dim {loaded.dim}, expected {dim}")
        return loaded
    raise ValueError(f"unknown mesh family {family!r}")


def parse_study_family(
    spec: str, dim: int, domain: tuple[float, float]
) -> Callable[[float], TensorMesh]:
    """Level-indexed mesh builder for a study; the level slot replaces the
    resolution field of the solve grammar."""
    family, _, rest = spec.partition(":")
    box = _domain_box(domain, dim)
    if family == "uniform":
        if rest:
            raise ValueError("study meshes take resolution from --levels; use 'uniform'")

        def build_u(level: float) -> TensorMesh:
            n = int(level)
            if n < 1 or n != level:
                raise ValueError(f"uniform study level must be a positive integer, got {level}")
            return mesh.build_uniform(box, (n,) * dim)

        return build_u
    if family == "pattern":
        ratios = _pattern_ratios(rest)

        def build_p(level: float) -> TensorMesh:
            depth = int(level)
            if depth < 1 or depth != level:
                raise ValueError(f"pattern study level must be a positive integer, got {level}")
            return mesh.build_pattern(box, ratios, depth)

        return build_p
    if family == "divisional":
        breaks, counts = _divisional_parts(rest, domain)

        def build_d(level: float) -> TensorMesh:
            m = int(level)
            if m < 1 or m != level:
                raise ValueError(f"divisional study level must be a positive integer, got {level}")
            scaled = tuple(c * m for c in counts)
            return mesh.build_divisionally_uniform(box, (breaks,) * dim, (scaled,) * dim)

        return build_d
    raise ValueError(f"mesh family {family!r} cannot be used in a study")


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _dump_json(path: str | None, doc: object) -> None:
    _write_text(path, json.dumps(doc, indent=2) + "\n")


def cmd_solve(config: RunConfig) -> int:
    if config.dim < 2:
        raise ValueError("the element needs dim >= 2")
    problem = analysis.problem_by_name(config.problem, config.dim)
    grid = parse_mesh_spec(config.mesh_spec, config.dim, config.domain)
    fefun, report, dofmap = analysis.solve_poisson(
        problem,
        grid,
        quad_points_per_axis=config.quad_points_per_axis,
        tol=config.tol,
    )
    result = {
        "config": config.to_json(),
        "h": mesh.mesh_size(grid),
        "ndof": dofmap.n_dofs,
        "n_constrained": int(dofmap.boundary_vertex_dofs.size),
        "err_l2": analysis.l2_error(fefun, problem.u, config.quad_points_per_axis),
        "err_h1": analysis.broken_h1_error(fefun, problem.u, config.quad_points_per_axis),
        "solver": {
            "iterations": report.iterations,
            "relative_residual": report.relative_residual,
            "converged": report.converged,
        },
    }
    _dump_json(config.output, result)
    return EXIT_OK if report.converged else EXIT_NO_CONVERGENCE


def cmd_study(config: RunConfig) -> int:
    if config.dim < 2:
        raise ValueError("the element needs dim >= 2")
    if len(config.levels) < 2:
        raise ValueError("a study needs at least two levels")
    problem = analysis.problem_by_name(config.problem, config.dim)
    builder = parse_study_family(config.mesh_spec, config.dim, config.domain)
    records = analysis.run_study(
        problem,
        builder,
        config.levels,
        quad_points_per_axis=config.quad_points_per_axis,
        tol=config.tol,
    )
    _write_text(config.csv_path, analysis.records_to_csv(records))
    if config.json_path is not None:
        doc = analysis.records_to_json(records, metadata={"config": config.to_json()})
        _dump_json(config.json_path, doc)
    if not all(r.solver_converged for r in records):
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _verify_mesh(dim: int) -> TensorMesh:
    box = ((0.0, 1.0),) * dim
    n = (4, 4) if dim == 2 else (3,) * dim
    return mesh.build_uniform(box, n)


def _verify_tasks(config: RunConfig) -> list[Callable[[], lemmas.LemmaReport]]:
    tasks: list[Callable[[], lemmas.LemmaReport]] = []
    for dim in config.dims:
        patch = lemmas.PatchSpec(
            axis=0,
            face_center=(0.5,) * dim,
            cross_half_lengths=(0.25,) * (dim - 1),
            h_left=0.25,
            h_right=0.25,
        )
        grid = _verify_mesh(dim)
        tasks.extend(
            [
                lambda d=dim: lemmas.check_unisolvence(d, config.trials, config.seed),
                lambda d=dim: lemmas.check_cell_orthogonality(d, config.trials, config.seed),
                lambda p=patch: lemmas.check_patch_orthogonality(p, config.trials, config.seed),
                lambda d=dim: lemmas.check_theta(d, config.trials, config.seed),
                lambda d=dim: lemmas.check_expansion_identity(d, config.trials, config.seed),
                lambda g=grid: lemmas.check_stable_decomposition(g, config.trials, config.seed),
                lambda g=grid: lemmas.check_interpolation_conformity(g),
            ]
        )
    return tasks


def _worker_count(n_tasks: int) -> int:
    workers = min(n_tasks, os.cpu_count() or 1)
    cap = os.environ.get("MORLEY_THREADS")
    if cap is not None:
        workers = min(workers, max(1, int(cap)))
    return workers


def cmd_verify(config: RunConfig) -> int:
    if any(d < 2 for d in config.dims):
        raise ValueError("the element needs dim >= 2")
    if not config.dims:
        raise ValueError("verify needs at least one dimension")
    tasks = _verify_tasks(config)
    workers = _worker_count(len(tasks))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(task) for task in tasks]
            reports = [f.result() for f in futures]
    else:
        reports = [task() for task in tasks]
    all_pass = all(r.passed for r in reports)
    doc = {
        "config": config.to_json(),
        "all_pass": all_pass,
        "reports": [r.to_json() for r in reports],
    }
    _dump_json(config.output, doc)
    return EXIT_OK if all_pass else EXIT_VERIFY_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morley",
        description="Rectangular Morley nonconforming solver for the Poisson problem",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--quad", type=int, default=5, dest="quad",
                       help="quadrature points per axis (default 5)")
        p.add_argument("--tol", type=float, default=1e-12,
                       help="solver relative-residual tolerance (default 1e-12)")
        p.add_argument("--domain", default="0,1",
                       help="LO,HI interval used on every axis (default 0,1)")

    p_solve = sub.add_parser("solve", help="one Poisson solve")
    p_solve.add_argument("--dim", type=int, default=2)
    p_solve.add_argument("--mesh", required=True, help="mesh grammar string")
    p_solve.add_argument("--problem", default="sinsin",
                         choices=("bubble", "sinsin", "zero", "linear"))
    p_solve.add_argument("--output", default=None, help="JSON output path (default stdout)")
    add_common(p_solve)

    p_study = sub.add_parser("study", help="convergence study over levels")
    p_study.add_argument("--dim", type=int, default=2)
    p_study.add_argument("--mesh", required=True,
                         help="mesh family: uniform | pattern:R1-R2 | divisional:split=S,counts=A:B")
    p_study.add_argument("--levels", required=True,
                         help="comma-separated refinement levels (family-specific)")
    p_study.add_argument("--problem", default="sinsin",
                         choices=("bubble", "sinsin", "zero", "linear"))
    p_study.add_argument("--csv", default=None, help="CSV output path (default stdout)")
    p_study.add_argument("--json", default=None, dest="json_path",
                         help="optional JSON output path for the same records")
    add_common(p_study)

    p_verify = sub.add_parser("verify", help="certify structural identities numerically")
    p_verify.add_argument("--dims", default="2,3", help="comma-separated dimensions (default 2,3)")
    p_verify.add_argument("--trials", type=int, default=100)
    p_verify.add_argument("--seed", type=int, default=lemmas.DEFAULT_SEED)
    p_verify.add_argument("--output", default=None, help="JSON output path (default stdout)")
    return parser


def _parse_domain(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"domain must be LO,HI, got {text!r}")
    return float(parts[0]), float(parts[1])


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.command == "solve":
        return RunConfig(
            command="solve",
            dim=args.dim,
            mesh_spec=args.mesh,
            problem=args.problem,
            domain=_parse_domain(args.domain),
            quad_points_per_axis=args.quad,
            tol=args.tol,
            output=args.output,
        )
    if args.command == "study":
        levels = tuple(float(x) for x in args.levels.split(",") if x)
        return RunConfig(
            command="study",
            dim=args.dim,
            mesh_spec=args.mesh,
            problem=args.problem,
            domain=_parse_domain(args.domain),
            levels=levels,
            quad_points_per_axis=args.quad,
            tol=args.tol,
            csv_path=args.csv,
            json_path=args.json_path,
        )
    dims = tuple(int(x) for x in args.dims.split(",") if x)
    return RunConfig(
        command="verify",
        dims=dims,
        trials=args.trials,
        seed=args.seed,
        output=args.output,
    )


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit code instead of raising."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return EXIT_OK
        return code if isinstance(code, int) else EXIT_INVALID_CONFIG
    try:
        config = _config_from_args(args)
        if config.command == "solve":
            return cmd_solve(config)
        if config.command == "study":
            return cmd_study(config)
        return cmd_verify(config)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_CONFIG


def console_main() -> None:
    raise SystemExit(main())
