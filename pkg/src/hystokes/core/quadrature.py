"""
Exact-degree quadrature on segments, triangles and polygons.

Segments use Gauss-Legendre. Triangles use the collapsed (Duffy) tensor rule: Gauss-Jacobi with
weight (1 - s) in the collapsed direction and Gauss-Legendre in the other, which has positive
weights for every degree. Polygons other than triangles are fan-triangulated from a center point
(the cell centroid).
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.typing import NDArray
from scipy.special import roots_jacobi


class QuadratureError(ValueError):
    """Raised for negative degrees or degenerate integration regions."""

    def __init__(self, reason: str):
        super().__init__(f"Quadrature error: {reason}")


@dataclass(frozen=True)
class QuadRule:
    points: NDArray[np.float64]  # (q, 2)
    weights: NDArray[np.float64]  # (q,)
    exactness: int

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    @property
    def size(self) -> int:
        return len(self.weights)

    def integrate(self, values: NDArray[np.float64]) -> NDArray[np.float64] | float:
        """Integrate point values; the quadrature axis is the last one."""
        result = values @ self.weights
        return float(result) if np.ndim(result) == 0 else result

    def shifted(self, offset: NDArray[np.float64]) -> "QuadRule":
        return QuadRule(self.points + offset, self.weights, self.exactness)


@lru_cache(maxsize=64)
def _gauss_legendre_01(n: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=64)
def _collapsed_triangle(degree: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Rule on the reference triangle (0,0), (1,0), (0,1) as (xi, eta) points and weights."""
    n = max(1, math.ceil((degree + 1) / 2))
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    s = 0.5 * (xj + 1.0)
    ws = 0.25 * wj
    t, wt = _gauss_legendre_01(n)
    ss, tt = np.meshgrid(s, t, indexing="ij")
    xi = ss.ravel()
    eta = (tt * (1.0 - ss)).ravel()
    weights = np.outer(ws, wt).ravel()
    return np.column_stack([xi, eta]), weights


def _check_degree(degree: int) -> None:
    if degree < 0:
        raise QuadratureError(f"degree must be non-negative, got {degree}")


def segment_rule(a: NDArray[np.float64], b: NDArray[np.float64], degree: int) -> QuadRule:
    """Gauss-Legendre rule on the segment [a, b] with ceil((degree+1)/2) nodes."""
    _check_degree(degree)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.linalg.norm(b - a))
    if length <= 0.0:
        raise QuadratureError("segment has zero length")
    n = max(1, math.ceil((degree + 1) / 2))
    t, w = _gauss_legendre_01(n)
    points = a[None, :] + t[:, None] * (b - a)[None, :]
    return QuadRule(points, w * length, 2 * n - 1)


def triangle_rule(p0: NDArray[np.float64], p1: NDArray[np.float64], p2: NDArray[np.float64], degree: int) -> QuadRule:
    _check_degree(degree)
    e1 = np.asarray(p1, dtype=float) - p0
    e2 = np.asarray(p2, dtype=float) - p0
    area = 0.5 * float(e1[0] * e2[1] - e1[1] * e2[0])
    if area <= 0.0:
        raise QuadratureError(f"degenerate or clockwise triangle (signed area {area:.3e})")
    ref_points, ref_weights = _collapsed_triangle(degree)
    points = p0[None, :] + ref_points[:, :1] * e1[None, :] + ref_points[:, 1:] * e2[None, :]
    n = max(1, math.ceil((degree + 1) / 2))
    return QuadRule(points, ref_weights * (2.0 * area), 2 * n - 1)


def cell_rule(vertices: NDArray[np.float64], degree: int, center: NDArray[np.float64] | None = None) -> QuadRule:
    """
    Rule on a counter-clockwise polygon.

    Triangles are integrated directly; other polygons are split into the triangles joining
    ``center`` (default: the vertex average) to each edge.
    """
    vertices = np.asarray(vertices, dtype=float)
    if len(vertices) == 3:
        return triangle_rule(vertices[0], vertices[1], vertices[2], degree)
    if center is None:
        center = vertices.mean(axis=0)
    n = len(vertices)
    parts = [triangle_rule(center, vertices[i], vertices[(i + 1) % n], degree) for i in range(n)]
    return QuadRule(
        np.concatenate([p.points for p in parts]),
        np.concatenate([p.weights for p in parts]),
        parts[0].exactness,
    )
