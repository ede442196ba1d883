"""Tensor-product Gauss-Legendre quadrature on the reference box [-1, 1]^d."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature rule with points of shape (n, dim) and weights of shape (n,).

    Weights sum to 2**dim, the measure of the reference box.
    """

    points: np.ndarray
    weights: np.ndarray

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@lru_cache(maxsize=None)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n < 1:
        raise ValueError(f"need at least one point per axis, got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def tensor_rule(dim: int, points_per_axis: int) -> QuadratureRule:
    """Tensor Gauss-Legendre rule on [-1, 1]^dim.

    Exact for integrands whose degree in each coordinate is at most
    2 * points_per_axis - 1.
    """
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    x1, w1 = _leggauss(points_per_axis)
    grids = np.meshgrid(*([x1] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*([w1] * dim), indexing="ij")
    w = np.ones(pts.shape[0])
    for g in wgrids:
        w = w * g.ravel()
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(points=pts, weights=w)


@lru_cache(maxsize=None)
def face_rule(dim: int, axis: int, side: int, points_per_axis: int) -> QuadratureRule:
    """Rule on the face xi_axis = side of [-1, 1]^dim.

    Points have shape (n, dim) with the axis coordinate pinned to side;
    weights sum to 2**(dim - 1), the measure of the reference face.
    """
    if side not in (-1, 1):
        raise ValueError(f"side must be -1 or +1, got {side}")
    if not 0 <= axis < dim:
        raise ValueError(f"axis {axis} out of range for dimension {dim}")
    if dim == 1:
        pts = np.array([[float(side)]])
        w = np.array([1.0])
    else:
        cross = tensor_rule(dim - 1, points_per_axis)
        pts = np.empty((cross.points.shape[0], dim))
        cols = [j for j in range(dim) if j != axis]
        pts[:, cols] = cross.points
        pts[:, axis] = side
        w = cross.weights.copy()
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(points=pts, weights=w)
