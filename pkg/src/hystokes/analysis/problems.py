"""
Stokes test problems on the unit square.

The manufactured problem uses the stream-function velocity u = (a(x) a'(y), -a(y) a'(x)) with
a(t) = t^2 (1 - t)^2, which is divergence free and vanishes with its gradient on the boundary, and
the zero-mean pressure p = x^7 + y^7 - 1/4.
"""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from numpy.typing import NDArray

Field = Callable[[NDArray[np.float64]], NDArray[np.float64]]

STREAM_POLYNOMIAL = Polynomial([0.0, 0.0, 1.0, -2.0, 1.0])  # t^2 - 2 t^3 + t^4
PRESSURE_POLYNOMIAL = Polynomial([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0])  # t^7
PRESSURE_SHIFT = 0.25


@dataclass(frozen=True)
class ProblemSpec:
    """Viscosity, forcing and exact solution; all fields take points of shape (q, 2)."""

    nu: float
    f: Field
    u: Field  # (q, 2)
    grad_u: Field  # (q, 2, 2), row = component
    p: Field  # (q,)
    grad_p: Field  # (q, 2)
    description: str = ""

    def __post_init__(self) -> None:
        if self.nu <= 0:
            error_msg = f"viscosity must be positive, got {self.nu}"
            raise ValueError(error_msg)

    def divergence(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        g = self.grad_u(points)
        return g[:, 0, 0] + g[:, 1, 1]


def manufactured(nu: float) -> ProblemSpec:
    """Polynomial solution with f = -nu Lap u + grad p in closed form."""
    a = STREAM_POLYNOMIAL
    da, d2a, d3a = a.deriv(1), a.deriv(2), a.deriv(3)
    q = PRESSURE_POLYNOMIAL
    dq = q.deriv()

    def u(points: NDArray[np.float64]) -> NDArray[np.float64]:
        x, y = points[:, 0], points[:, 1]
        return np.column_stack([a(x) * da(y), -a(y) * da(x)])

    def grad_u(points: NDArray[np.float64]) -> NDArray[np.float64]:
        x, y = points[:, 0], points[:, 1]
        out = np.empty((len(points), 2, 2))
        out[:, 0, 0] = da(x) * da(y)
        out[:, 0, 1] = a(x) * d2a(y)
        out[:, 1, 0] = -a(y) * d2a(x)
        out[:, 1, 1] = -da(y) * da(x)
        return out

    def p(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return q(points[:, 0]) + q(points[:, 1]) - PRESSURE_SHIFT

    def grad_p(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.column_stack([dq(points[:, 0]), dq(points[:, 1])])

    def f(points: NDArray[np.float64]) -> NDArray[np.float64]:
        x, y = points[:, 0], points[:, 1]
        lap_u1 = d2a(x) * da(y) + a(x) * d3a(y)
        lap_u2 = -(d2a(y) * da(x) + a(y) * d3a(x))
        return np.column_stack([-nu * lap_u1, -nu * lap_u2]) + grad_p(points)

    return ProblemSpec(nu=nu, f=f, u=u, grad_u=grad_u, p=p, grad_p=grad_p, description="manufactured")


def zero_problem(nu: float = 1.0) -> ProblemSpec:
    """f = 0; the unique discrete solution is zero."""

    def zero_vector(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.zeros((len(points), 2))

    def zero_matrix(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.zeros((len(points), 2, 2))

    def zero_scalar(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.zeros(len(points))

    return ProblemSpec(
        nu=nu, f=zero_vector, u=zero_vector, grad_u=zero_matrix, p=zero_scalar, grad_p=zero_vector, description="zero"
    )


def scaled(problem: ProblemSpec, factor: float) -> ProblemSpec:
    """Same exact velocity, viscosity and forcing multiplied by ``factor`` (pressure scales too)."""

    def f(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return factor * problem.f(points)

    def p(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return factor * problem.p(points)

    def grad_p(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return factor * problem.grad_p(points)

    return ProblemSpec(
        nu=factor * problem.nu,
        f=f,
        u=problem.u,
        grad_u=problem.grad_u,
        p=p,
        grad_p=grad_p,
        description=f"{problem.description} x{factor:g}",
    )
