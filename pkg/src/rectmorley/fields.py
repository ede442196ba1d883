"""Smooth scalar fields with exact derivatives, for interpolation and error studies.

A SmoothField bundles vectorized callables for the value and the derivatives
the solver and the structural checks consume. Polynomial fields carry exact
derivatives of every order; trigonometric fields are hand-differentiated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

Monomial = tuple[int, ...]


@dataclass(frozen=True)
class SmoothField:
    """Scalar field on R^dim with whatever derivatives the use site needs.

    value : callable
        Maps points of shape (..., dim) to values of shape (...).
    gradient : callable or None
        Maps (..., dim) to (..., dim).
    laplacian : callable or None
        Maps (..., dim) to (...).
    mixed_third : callable or None
        Maps (..., dim) to (..., dim, dim); entry [i, j] holds
        d^3 / dx_i dx_j^2 (the diagonal holds d^3 / dx_i^3).
    """

    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    laplacian: Callable[[np.ndarray], np.ndarray] | None = None
    mixed_third: Callable[[np.ndarray], np.ndarray] | None = None


def poly_value(coeffs: Mapping[Monomial, float], x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1])
    for alpha, c in coeffs.items():
        term = np.full(x.shape[:-1], c)
        for j, a in enumerate(alpha):
            if a:
                term = term * x[..., j] ** a
        out += term
    return out


def poly_diff(coeffs: Mapping[Monomial, float], axis: int) -> dict[Monomial, float]:
    out: dict[Monomial, float] = {}
    for alpha, c in coeffs.items():
        a = alpha[axis]
        if a == 0:
            continue
        beta = alpha[:axis] + (a - 1,) + alpha[axis + 1 :]
        out[beta] = out.get(beta, 0.0) + c * a
    return out


def polynomial_field(coeffs: Mapping[Monomial, float], dim: int) -> SmoothField:
    """Field from a monomial-to-coefficient map, with exact derivatives."""
    coeffs = {tuple(a): float(c) for a, c in coeffs.items()}
    for alpha in coeffs:
        if len(alpha) != dim:
            raise ValueError(f"monomial {alpha} does not match dimension {dim}")
    grads = [poly_diff(coeffs, j) for j in range(dim)]
    lap = [poly_diff(g, j) for j, g in enumerate(grads)]
    thirds = [[poly_diff(poly_diff(grads[i], j), j) for j in range(dim)] for i in range(dim)]

    def value(x: np.ndarray) -> np.ndarray:
        return poly_value(coeffs, x)

    def gradient(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([poly_value(g, x) for g in grads], axis=-1)

    def laplacian(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for term in lap:
            out += poly_value(term, x)
        return out

    def mixed_third(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape[:-1] + (dim, dim))
        for i in range(dim):
            for j in range(dim):
                out[..., i, j] = poly_value(thirds[i][j], x)
        return out

    return SmoothField(dim=dim, value=value, gradient=gradient, laplacian=laplacian, mixed_third=mixed_third)


def constant_field(c: float, dim: int) -> SmoothField:
    return polynomial_field({(0,) * dim: c}, dim)


def coordinate_field(axis: int, dim: int) -> SmoothField:
    alpha = tuple(1 if j == axis else 0 for j in range(dim))
    return polynomial_field({alpha: 1.0}, dim)


def random_polynomial(dim: int, degree: int, rng: np.random.Generator, scale: float = 1.0) -> SmoothField:
    """Random polynomial of total degree <= degree with coefficients in [-scale, scale]."""
    coeffs: dict[Monomial, float] = {}

    def walk(prefix: tuple[int, ...], remaining: int) -> None:
        if len(prefix) == dim:
            coeffs[prefix] = float(rng.uniform(-scale, scale))
            return
        for a in range(remaining + 1):
            walk(prefix + (a,), remaining - a)

    walk((), degree)
    return polynomial_field(coeffs, dim)


def product_sine_field(dim: int, frequency: float = np.pi) -> SmoothField:
    """prod_i sin(frequency * x_i), with gradient and Laplacian."""
    w = float(frequency)

    def value(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.prod(np.sin(w * x), axis=-1)

    def gradient(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = np.sin(w * x)
        c = np.cos(w * x)
        full = np.prod(s, axis=-1, keepdims=True)
        out = np.empty_like(s)
        for j in range(x.shape[-1]):
            others = np.delete(s, j, axis=-1).prod(axis=-1)
            out[..., j] = w * c[..., j] * others
        return out

    def laplacian(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        dim_ = x.shape[-1]
        return -dim_ * w * w * np.prod(np.sin(w * x), axis=-1)

    def mixed_third(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = np.sin(w * x)
        c = np.cos(w * x)
        dim_ = x.shape[-1]
        out = np.empty(x.shape[:-1] + (dim_, dim_))
        for i in range(dim_):
            si = np.delete(s, i, axis=-1).prod(axis=-1)
            out[..., i, i] = -(w**3) * c[..., i] * si
            for j in range(dim_):
                if j == i:
                    continue
                keep = [k for k in range(dim_) if k not in (i, j)]
                rest = s[..., keep].prod(axis=-1) if keep else np.ones(x.shape[:-1])
                out[..., i, j] = -(w**3) * c[..., i] * s[..., j] * rest
        return out

    return SmoothField(
        dim=dim, value=value, gradient=gradient, laplacian=laplacian, mixed_third=mixed_third
    )


def product_bubble_field(dim: int) -> SmoothField:
    """prod_i x_i (1 - x_i), with gradient and Laplacian."""

    def value(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.prod(x * (1.0 - x), axis=-1)

    def gradient(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        b = x * (1.0 - x)
        out = np.empty_like(b)
        for j in range(x.shape[-1]):
            others = np.delete(b, j, axis=-1).prod(axis=-1)
            out[..., j] = (1.0 - 2.0 * x[..., j]) * others
        return out

    def laplacian(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        b = x * (1.0 - x)
        out = np.zeros(x.shape[:-1])
        for j in range(x.shape[-1]):
            others = np.delete(b, j, axis=-1).prod(axis=-1)
            out += -2.0 * others
        return out

    def mixed_third(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        b = x * (1.0 - x)
        dim_ = x.shape[-1]
        out = np.zeros(x.shape[:-1] + (dim_, dim_))
        for i in range(dim_):
            for j in range(dim_):
                if j == i:
                    continue  # the per-axis factor is quadratic, so d^3/dx_i^3 = 0
                keep = [k for k in range(dim_) if k not in (i, j)]
                rest = b[..., keep].prod(axis=-1) if keep else np.ones(x.shape[:-1])
                out[..., i, j] = -2.0 * (1.0 - 2.0 * x[..., i]) * rest
        return out

    return SmoothField(
        dim=dim, value=value, gradient=gradient, laplacian=laplacian, mixed_third=mixed_third
    )
