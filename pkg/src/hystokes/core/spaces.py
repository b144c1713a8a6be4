"""
Mixed vector spaces on a cell: Nedelec (first kind), Raviart-Thomas-Nedelec and
Brezzi-Douglas-Fortin-Marini.

Each builder returns the raw generator set written in the scaled coordinate y = (x - x_T) / h_T.
Generators are checked for linear independence through their Gram matrix, and the dimension is
compared with its closed form. Pass ``orthonormal=True`` to get an L2-orthonormal basis of the
same span.
"""

import numpy as np
from numpy.typing import NDArray

from .polynomials import (
    BasisError,
    PolyBasis,
    monomial_exponents,
    monomial_index,
    orthonormalizer,
    scalar_dim,
    vector_basis,
)
from .types import CellGeometry


class NonRectangularCellError(ValueError):
    """Raised when a space that needs an axis-aligned rectangle is requested on another cell."""

    def __init__(self, space: str, n_faces: int):
        super().__init__(f"{space} needs an axis-aligned rectangular cell (got a cell with {n_faces} faces)")


def nedelec_dim(degree: int) -> int:
    return max(degree * degree + 2 * degree, 0)


def bdfm_dim(degree: int) -> int:
    return (degree + 1) * (degree + 2) - 2


def _empty(cell: CellGeometry, name: str) -> PolyBasis:
    return PolyBasis(cell.center, cell.diameter, 0, np.zeros((0, 2, 1)), (2,), name)


def _finish(
    cell: CellGeometry, degree: int, generators: list[NDArray[np.float64]], expected: int, name: str, orthonormal: bool
) -> PolyBasis:
    basis = PolyBasis(cell.center, cell.diameter, degree, np.asarray(generators), (2,), name)
    if basis.dim != expected:
        raise BasisError(name, f"built {basis.dim} generators, expected {expected}")
    q = orthonormalizer(basis.gram(cell.rule(2 * degree)), name)
    return basis.transformed(q) if orthonormal else basis


def nedelec_basis(cell: CellGeometry, degree: int, orthonormal: bool = False) -> PolyBasis:
    """
    N^degree(T) = grad P^degree(T) + y^perp P^(degree-1)(T), with (a, b)^perp = (b, -a).

    Dimension degree^2 + 2 degree; N^0 and N^-1 are empty.
    """
    name = f"N{degree}"
    if degree <= 0:
        return _empty(cell, name)
    index = monomial_index(degree)
    nm = len(index)
    generators = []
    for a, b in monomial_exponents(degree)[1:]:
        g = np.zeros((2, nm))
        if a > 0:
            g[0, index[(int(a) - 1, int(b))]] = a
        if b > 0:
            g[1, index[(int(a), int(b) - 1)]] = b
        generators.append(g)
    for a, b in monomial_exponents(degree - 1):
        g = np.zeros((2, nm))
        g[0, index[(int(a), int(b) + 1)]] = 1.0
        g[1, index[(int(a) + 1, int(b))]] = -1.0
        generators.append(g)
    return _finish(cell, degree, generators, nedelec_dim(degree), name, orthonormal)


def rtn_basis(cell: CellGeometry, degree: int, orthonormal: bool = False) -> PolyBasis:
    """
    RTN^degree(T) = rot P^degree(T) + y P^(degree-1)(T), with rot q = (d2 q, -d1 q).

    Dimension degree^2 + 2 degree; the divergence of every member lies in P^(degree-1)(T).
    """
    name = f"RTN{degree}"
    if degree < 1:
        error_msg = f"RTN degree must be at least 1, got {degree}"
        raise ValueError(error_msg)
    index = monomial_index(degree)
    nm = len(index)
    generators = []
    for a, b in monomial_exponents(degree)[1:]:
        g = np.zeros((2, nm))
        if b > 0:
            g[0, index[(int(a), int(b) - 1)]] = b
        if a > 0:
            g[1, index[(int(a) - 1, int(b))]] = -a
        generators.append(g)
    for a, b in monomial_exponents(degree - 1):
        g = np.zeros((2, nm))
        g[0, index[(int(a) + 1, int(b))]] = 1.0
        g[1, index[(int(a), int(b) + 1)]] = 1.0
        generators.append(g)
    return _finish(cell, degree, generators, nedelec_dim(degree), name, orthonormal)


def bdfm_basis(cell: CellGeometry, degree: int, orthonormal: bool = False) -> PolyBasis:
    """BDFM^degree(T) = P^degree(T)^2 without (y2^degree, 0) and (0, y1^degree); rectangles only."""
    name = f"BDFM{degree}"
    if degree < 1:
        error_msg = f"BDFM degree must be at least 1, got {degree}"
        raise ValueError(error_msg)
    if not cell.is_rectangle():
        raise NonRectangularCellError(name, cell.n_faces)
    index = monomial_index(degree)
    nm = len(index)
    excluded = {(0, index[(0, degree)]), (1, index[(degree, 0)])}
    generators = []
    for c in range(2):
        for i in range(nm):
            if (c, i) in excluded:
                continue
            g = np.zeros((2, nm))
            g[c, i] = 1.0
            generators.append(g)
    return _finish(cell, degree, generators, bdfm_dim(degree), name, orthonormal)


def gradient_space(cell: CellGeometry, degree: int) -> PolyBasis:
    """grad P^(degree+1)(T)^2 as an orthonormal matrix-valued basis (the gradient choice of Sigma_T)."""
    full = vector_basis(cell, degree + 1)
    n_scalar = scalar_dim(degree + 1)
    nonconstant = [i for i in range(full.dim) if i % n_scalar != 0]
    grads = full.subset(nonconstant).gradient_basis(name=f"grad P{degree + 1}^2")
    return grads.orthonormalized(cell.rule(2 * max(degree, 0)))
