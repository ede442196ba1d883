"""Tensor-product box meshes: uniform, divisionally uniform, pattern, explicit.

A mesh is the tensor product of d axis partitions. Cells, vertices, and faces
are enumerated lexicographically by multi-index (C order, last axis fastest);
faces are grouped axis-major. These orderings fix the global DOF numbering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np


@dataclass(frozen=True)
class AxisPartition:
    """Strictly increasing breakpoints along one axis."""

    breakpoints: tuple[float, ...]

    def __post_init__(self) -> None:
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.size < 2:
            raise ValueError("an axis partition needs at least 2 breakpoints")
        if not np.all(np.isfinite(bp)):
            raise ValueError("breakpoints must be finite")
        if not np.all(np.diff(bp) > 0):
            raise ValueError("breakpoints must be strictly increasing")

    @property
    def n_cells(self) -> int:
        return len(self.breakpoints) - 1


@dataclass(frozen=True)
class Cell:
    """Axis-aligned box given by its center and positive half-lengths."""

    center: tuple[float, ...]
    half_lengths: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.center) != len(self.half_lengths):
            raise ValueError("center and half_lengths must have equal length")
        if any(h <= 0 for h in self.half_lengths):
            raise ValueError("half-lengths must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return float(np.prod([2.0 * h for h in self.half_lengths]))

    @property
    def diameter(self) -> float:
        return 2.0 * float(np.linalg.norm(self.half_lengths))


@dataclass(frozen=True, order=True)
class FaceId:
    """One (d-1)-face of the mesh.

    axis : int
        Axis (0-based) the face is orthogonal to.
    layer : int
        Breakpoint index along that axis, 0..n_axis.
    cross_index : tuple of int
        Cell multi-index in the remaining d-1 axes.
    """

    axis: int
    layer: int
    cross_index: tuple[int, ...]


class TensorMesh:
    """Immutable tensor-product mesh of a d-dimensional box, d >= 2."""

    def __init__(self, partitions: Sequence[AxisPartition]):
        if len(partitions) < 2:
            raise ValueError("tensor meshes require dimension >= 2")
        self._partitions = tuple(partitions)
        self._bp = [np.asarray(p.breakpoints, dtype=float) for p in self._partitions]
        for b in self._bp:
            b.setflags(write=False)
        self._centers_1d = [0.5 * (b[:-1] + b[1:]) for b in self._bp]
        self._half_1d = [0.5 * np.diff(b) for b in self._bp]
        for a in self._centers_1d + self._half_1d:
            a.setflags(write=False)

    @property
    def dim(self) -> int:
        return len(self._partitions)

    @property
    def partitions(self) -> tuple[AxisPartition, ...]:
        return self._partitions

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(p.n_cells for p in self._partitions)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_vertices(self) -> int:
        return int(np.prod([s + 1 for s in self.shape]))

    @property
    def n_faces(self) -> int:
        total = 0
        for j in range(self.dim):
            total += (self.shape[j] + 1) * self.n_cells // self.shape[j]
        return total

    def breakpoints(self, axis: int) -> np.ndarray:
        return self._bp[axis]

    def axis_centers(self, axis: int) -> np.ndarray:
        return self._centers_1d[axis]

    def axis_half_lengths(self, axis: int) -> np.ndarray:
        return self._half_1d[axis]

    @property
    def domain(self) -> tuple[tuple[float, float], ...]:
        return tuple((float(b[0]), float(b[-1])) for b in self._bp)

    def cell(self, multi_index: Sequence[int]) -> Cell:
        mi = tuple(int(m) for m in multi_index)
        if len(mi) != self.dim:
            raise ValueError(f"multi-index length {len(mi)} != dim {self.dim}")
        for j, m in enumerate(mi):
            if not 0 <= m < self.shape[j]:
                raise ValueError(f"cell index {m} out of range on axis {j}")
        return Cell(
            center=tuple(float(self._centers_1d[j][m]) for j, m in enumerate(mi)),
            half_lengths=tuple(float(self._half_1d[j][m]) for j, m in enumerate(mi)),
        )

    def cell_multi_indices(self) -> np.ndarray:
        """(n_cells, dim) array of cell multi-indices in C order."""
        grids = np.meshgrid(*[np.arange(s) for s in self.shape], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def cell_centers(self) -> np.ndarray:
        mi = self.cell_multi_indices()
        return np.stack([self._centers_1d[j][mi[:, j]] for j in range(self.dim)], axis=-1)

    def cell_half_lengths(self) -> np.ndarray:
        mi = self.cell_multi_indices()
        return np.stack([self._half_1d[j][mi[:, j]] for j in range(self.dim)], axis=-1)

    def face_grid_shape(self, axis: int) -> tuple[int, ...]:
        """Shape of the face grid of one axis: cell counts with axis slot n+1."""
        return tuple(s + 1 if k == axis else s for k, s in enumerate(self.shape))

    def faces(self) -> Iterator[FaceId]:
        """All faces, axis-major; within an axis, C order over the face grid."""
        for j in range(self.dim):
            for multi in np.ndindex(*self.face_grid_shape(j)):
                cross = tuple(int(m) for k, m in enumerate(multi) if k != j)
                yield FaceId(axis=j, layer=int(multi[j]), cross_index=cross)

    def is_interior_face(self, face: FaceId) -> bool:
        self._check_face(face)
        return 0 < face.layer < self.shape[face.axis]

    def face_cells(self, face: FaceId) -> tuple[tuple[int, ...] | None, tuple[int, ...] | None]:
        """Multi-indices of the (left, right) cells; None on the boundary side."""
        self._check_face(face)
        j, layer = face.axis, face.layer
        left = None
        right = None
        if layer > 0:
            mi = list(face.cross_index)
            mi.insert(j, layer - 1)
            left = tuple(mi)
        if layer < self.shape[j]:
            mi = list(face.cross_index)
            mi.insert(j, layer)
            right = tuple(mi)
        return left, right

    def _check_face(self, face: FaceId) -> None:
        j = face.axis
        if not 0 <= j < self.dim:
            raise ValueError(f"face axis {j} out of range")
        if not 0 <= face.layer <= self.shape[j]:
            raise ValueError(f"face layer {face.layer} out of range on axis {j}")
        cross_shape = tuple(s for k, s in enumerate(self.shape) if k != j)
        if len(face.cross_index) != self.dim - 1:
            raise ValueError("cross index must have length dim - 1")
        for c, s in zip(face.cross_index, cross_shape):
            if not 0 <= c < s:
                raise ValueError(f"face cross index {face.cross_index} out of range")

    def locate(self, point: Sequence[float], rtol: float = 1e-12) -> tuple[int, ...]:
        """Containing cell of a point; points on shared faces go to the smaller multi-index."""
        x = np.asarray(point, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"point must have {self.dim} coordinates")
        mi = []
        for j in range(self.dim):
            b = self._bp[j]
            span = b[-1] - b[0]
            if x[j] < b[0] - rtol * span or x[j] > b[-1] + rtol * span:
                raise ValueError(f"point coordinate {x[j]} outside domain on axis {j}")
            k = int(np.searchsorted(b, x[j], side="left")) - 1
            mi.append(min(max(k, 0), self.shape[j] - 1))
        return tuple(mi)


def _as_domain(domain_box: Sequence[Sequence[float]]) -> list[tuple[float, float]]:
    out = []
    for iv in domain_box:
        lo, hi = float(iv[0]), float(iv[1])
        if not hi > lo:
            raise ValueError(f"degenerate domain interval [{lo}, {hi}]")
        out.append((lo, hi))
    if len(out) < 2:
        raise ValueError("domain must have dimension >= 2")
    return out


def build_uniform(domain_box: Sequence[Sequence[float]], n: Sequence[int]) -> TensorMesh:
    """Uniform mesh with n[j] equal cells along axis j."""
    domain = _as_domain(domain_box)
    if len(n) != len(domain):
        raise ValueError("cell counts must match domain dimension")
    parts = []
    for (lo, hi), nj in zip(domain, n):
        nj = int(nj)
        if nj < 1:
            raise ValueError(f"cell count must be positive, got {nj}")
        parts.append(AxisPartition(tuple(np.linspace(lo, hi, nj + 1))))
    return TensorMesh(parts)


def build_divisionally_uniform(
    domain_box: Sequence[Sequence[float]],
    block_breaks: Sequence[Sequence[float]],
    n_per_block: Sequence[Sequence[int]],
) -> TensorMesh:
    """Per-axis blocks with constant spacing inside each block.

    block_breaks[j] lists interior split points of axis j (may be empty);
    n_per_block[j] gives the cell count inside each of the len(block_breaks[j]) + 1
    blocks.
    """
    domain = _as_domain(domain_box)
    if len(block_breaks) != len(domain) or len(n_per_block) != len(domain):
        raise ValueError("block data must match domain dimension")
    parts = []
    for (lo, hi), splits, counts in zip(domain, block_breaks, n_per_block):
        splits = [float(s) for s in splits]
        if any(not lo < s < hi for s in splits):
            raise ValueError(f"split points {splits} must lie strictly inside ({lo}, {hi})")
        if sorted(splits) != splits or len(set(splits)) != len(splits):
            raise ValueError("split points must be strictly increasing")
        edges = [lo] + splits + [hi]
        if len(counts) != len(edges) - 1:
            raise ValueError(f"need {len(edges) - 1} per-block counts, got {len(counts)}")
        bp: list[float] = [lo]
        for b0, b1, c in zip(edges[:-1], edges[1:], counts):
            c = int(c)
            if c < 1:
                raise ValueError(f"per-block count must be positive, got {c}")
            bp.extend(np.linspace(b0, b1, c + 1)[1:])
        parts.append(AxisPartition(tuple(bp)))
    return TensorMesh(parts)


def build_pattern(
    domain_box: Sequence[Sequence[float]], ratios: Sequence[float], level: int
) -> TensorMesh:
    """`level` repetitions of a positive weight pattern, rescaled per axis.

    The same pattern is applied along every axis, which keeps the max aspect
    ratio equal to max(ratios)/min(ratios) at every level.
    """
    domain = _as_domain(domain_box)
    ratios = [float(r) for r in ratios]
    if not ratios:
        raise ValueError("ratio pattern must be nonempty")
    if any(r <= 0 for r in ratios):
        raise ValueError("ratio pattern weights must be positive")
    level = int(level)
    if level < 1:
        raise ValueError(f"level must be positive, got {level}")
    weights = np.tile(ratios, level)
    rel = np.concatenate([[0.0], np.cumsum(weights)]) / weights.sum()
    parts = []
    for lo, hi in domain:
        parts.append(AxisPartition(tuple(lo + (hi - lo) * rel)))
    return TensorMesh(parts)


def build_explicit(breakpoints: Sequence[Sequence[float]]) -> TensorMesh:
    """Mesh from raw per-axis breakpoint lists."""
    return TensorMesh([AxisPartition(tuple(float(b) for b in bp)) for bp in breakpoints])


def build_jittered(
    domain_box: Sequence[Sequence[float]],
    n: Sequence[int],
    amplitude: float = 0.3,
    seed: int = 0,
) -> TensorMesh:
    """Uniform mesh with interior breakpoints perturbed by a seeded jitter.

    amplitude is the maximal relative shift of an interior breakpoint as a
    fraction of the local spacing; values below 0.5 keep monotonicity.
    """
    if not 0 <= amplitude < 0.5:
        raise ValueError("amplitude must lie in [0, 0.5)")
    base = build_uniform(domain_box, n)
    rng = np.random.default_rng(seed)
    parts = []
    for j in range(base.dim):
        bp = base.breakpoints(j).copy()
        spacing = np.diff(bp)
        shift = rng.uniform(-amplitude, amplitude, size=len(bp) - 2)
        bp[1:-1] += shift * np.minimum(spacing[:-1], spacing[1:])
        parts.append(AxisPartition(tuple(bp)))
    return TensorMesh(parts)


def mesh_size(mesh: TensorMesh) -> float:
    """Max over cells of the Euclidean diagonal."""
    half = mesh.cell_half_lengths()
    return 2.0 * float(np.max(np.linalg.norm(half, axis=1)))


def is_uniform_patch(mesh: TensorMesh, face: FaceId) -> bool:
    """True iff the two cells sharing an interior face have equal measure."""
    if not mesh.is_interior_face(face):
        raise ValueError("is_uniform_patch requires an interior face")
    h = mesh.axis_half_lengths(face.axis)
    left, right = h[face.layer - 1], h[face.layer]
    return bool(abs(left - right) <= 1e-12 * max(left, right))


def mesh_to_spec(mesh: TensorMesh) -> dict:
    """JSON-ready description (explicit breakpoints preserve any family)."""
    return {
        "dim": mesh.dim,
        "family": "explicit",
        "domain": [[lo, hi] for lo, hi in mesh.domain],
        "breakpoints": [list(map(float, mesh.breakpoints(j))) for j in range(mesh.dim)],
    }


def mesh_from_spec(spec: dict) -> TensorMesh:
    """Build a mesh from a JSON mesh document.

    { "dim": int, "family": "uniform"|"divisional"|"pattern"|"explicit",
      "domain": [[lo,hi],...], family-specific fields }
    """
    if not isinstance(spec, dict):
        raise ValueError("mesh spec must be a JSON object")
    try:
        dim = int(spec["dim"])
        family = spec["family"]
    except KeyError as exc:
        raise ValueError(f"mesh spec missing field {exc}") from exc
    domain = spec.get("domain", [[0.0, 1.0]] * dim)
    if len(domain) != dim:
        raise ValueError("domain length must equal dim")
    if family == "uniform":
        return build_uniform(domain, spec["n"])
    if family == "divisional":
        return build_divisionally_uniform(domain, spec["block_breaks"], spec["n_per_block"])
    if family == "pattern":
        return build_pattern(domain, spec["ratios"], spec["level"])
    if family == "explicit":
        bp = spec["breakpoints"]
        if len(bp) != dim:
            raise ValueError("breakpoints length must equal dim")
        return build_explicit(bp)
    raise ValueError(f"unknown mesh family {family!r}")


def load_mesh(path: str) -> TensorMesh:
    with open(path, "r", encoding="utf-8") as fh:
        return mesh_from_spec(json.load(fh))
