"""
Polynomial bases on cells and faces.

Cell functions are combinations of scaled monomials ((x - x_T) / h_T)^alpha. A ``PolyBasis``
stores a coefficient tensor of shape (dim, ncomp, nmono): basis function i, component c, monomial
j. Scalar, vector and matrix fields share the same machinery; matrix components are stored
row-major (c = 2 * row + col). Vector and matrix bases enumerate components in the outer loop
and scalar functions in the inner loop.

Face functions are orthonormal Legendre polynomials in the arc-length coordinate along t_F.
"""

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import legvander
from numpy.typing import NDArray

from .quadrature import QuadRule
from .types import CellGeometry, FaceGeometry

ORTHONORMALITY_TOLERANCE = 1e-10


class BasisError(ArithmeticError):
    """Raised when a generator set is rank deficient or a Gram matrix is singular."""

    def __init__(self, what: str, reason: str):
        super().__init__(f"Invalid basis for {what}: {reason}")


def scalar_dim(degree: int) -> int:
    return 0 if degree < 0 else (degree + 1) * (degree + 2) // 2


@lru_cache(maxsize=32)
def monomial_exponents(degree: int) -> NDArray[np.int64]:
    """Exponents (a, b) of y1^a y2^b, by increasing total degree, then decreasing a."""
    exps = [(d - j, j) for d in range(max(degree, 0) + 1) for j in range(d + 1)]
    array = np.asarray(exps, dtype=np.int64).reshape(-1, 2)
    array.setflags(write=False)
    return array


def monomial_index(degree: int) -> dict[tuple[int, int], int]:
    return {(int(a), int(b)): i for i, (a, b) in enumerate(monomial_exponents(degree))}


class PolyBasis:
    def __init__(
        self,
        center: NDArray[np.float64],
        scale: float,
        degree: int,
        coeffs: NDArray[np.float64],
        shape: tuple[int, ...],
        name: str = "",
    ):
        self.center = np.asarray(center, dtype=float)
        self.scale = float(scale)
        self.degree = max(degree, 0)
        self.exponents = monomial_exponents(self.degree)
        ncomp = int(np.prod(shape)) if shape else 1
        self.coeffs = np.asarray(coeffs, dtype=float).reshape(-1, ncomp, len(self.exponents))
        self.shape = shape
        self.name = name

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[1]

    def __len__(self) -> int:
        return self.dim

    def __repr__(self) -> str:
        return f"PolyBasis({self.name or 'unnamed'}, dim={self.dim}, shape={self.shape}, degree={self.degree})"

    # Evaluation

    def _monomials(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        y = (np.asarray(points, dtype=float) - self.center) / self.scale
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        return y[:, :1] ** a[None, :] * y[:, 1:] ** b[None, :]

    def _monomial_gradients(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        y = (np.asarray(points, dtype=float) - self.center) / self.scale
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        y1, y2 = y[:, :1], y[:, 1:]
        d1 = a[None, :] * y1 ** np.maximum(a - 1, 0)[None, :] * y2 ** b[None, :]
        d2 = b[None, :] * y1 ** a[None, :] * y2 ** np.maximum(b - 1, 0)[None, :]
        return np.stack([d1, d2], axis=-1) / self.scale

    def values(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        """Basis values, shape (dim, q, ncomp)."""
        return np.einsum("ncm,qm->nqc", self.coeffs, self._monomials(points))

    def gradients(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        """Basis gradients, shape (dim, q, ncomp, 2)."""
        return np.einsum("ncm,qmd->nqcd", self.coeffs, self._monomial_gradients(points))

    def divergences(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        """Divergence of a vector basis, shape (dim, q)."""
        if self.ncomp != 2:
            error_msg = f"divergence needs a vector basis, got {self.shape}"
            raise ValueError(error_msg)
        grads = self.gradients(points)
        return grads[:, :, 0, 0] + grads[:, :, 1, 1]

    def gram(self, rule: QuadRule) -> NDArray[np.float64]:
        vals = self.values(rule.points)
        return np.einsum("iqc,jqc,q->ij", vals, vals, rule.weights)

    # Derived bases

    def transformed(self, matrix: NDArray[np.float64], name: str | None = None) -> "PolyBasis":
        """Basis whose i-th function is sum_j matrix[i, j] * self[j]."""
        coeffs = np.einsum("ij,jcm->icm", np.asarray(matrix, dtype=float).reshape(-1, self.dim), self.coeffs)
        return PolyBasis(self.center, self.scale, self.degree, coeffs, self.shape, name or self.name)

    def subset(self, indices: NDArray[np.int64] | list[int] | slice, name: str | None = None) -> "PolyBasis":
        return PolyBasis(self.center, self.scale, self.degree, self.coeffs[indices], self.shape, name or self.name)

    def gradient_basis(self, name: str | None = None) -> "PolyBasis":
        """Basis of the gradients; scalar -> vector, vector -> matrix (row = component)."""
        index = monomial_index(self.degree)
        nm = len(self.exponents)
        derivative = np.zeros((2, nm, nm))
        for j, (a, b) in enumerate(self.exponents):
            if a > 0:
                derivative[0, index[(int(a) - 1, int(b))], j] = a / self.scale
            if b > 0:
                derivative[1, index[(int(a), int(b) - 1)], j] = b / self.scale
        coeffs = np.einsum("dtm,ncm->ncdt", derivative, self.coeffs).reshape(self.dim, self.ncomp * 2, nm)
        shape = (2,) if self.ncomp == 1 else (self.ncomp, 2)
        return PolyBasis(self.center, self.scale, self.degree, coeffs, shape, name or f"grad {self.name}")

    def orthonormalized(self, rule: QuadRule, name: str | None = None) -> "PolyBasis":
        """L2-orthonormal basis of the same span (modified Gram-Schmidt, two passes)."""
        if self.dim == 0:
            return self
        q = orthonormalizer(self.gram(rule), self.name)
        return self.transformed(q, name or self.name)


def orthonormalizer(gram: NDArray[np.float64], what: str = "basis") -> NDArray[np.float64]:
    """
    Rows of the returned matrix are the coordinates of an orthonormal basis with respect to the
    Gram matrix ``gram``; row i only involves functions 0..i.
    """
    n = gram.shape[0]
    q = np.zeros((n, n))
    for i in range(n):
        v = np.zeros(n)
        v[i] = 1.0
        for _ in range(2):
            for j in range(i):
                v -= (q[j] @ gram @ v) * q[j]
        norm2 = float(v @ gram @ v)
        if norm2 <= ORTHONORMALITY_TOLERANCE**2 * gram[i, i]:
            raise BasisError(what, f"generator {i} is linearly dependent on the previous ones")
        q[i] = v / np.sqrt(norm2)
    return q


def _identity_coeffs(degree: int, ncomp: int) -> NDArray[np.float64]:
    nm = scalar_dim(degree)
    coeffs = np.zeros((ncomp * nm, ncomp, len(monomial_exponents(degree))))
    for c in range(ncomp):
        for i in range(nm):
            coeffs[c * nm + i, c, i] = 1.0
    return coeffs


def _tensor_basis(cell: CellGeometry, degree: int, shape: tuple[int, ...], name: str, orthonormal: bool) -> PolyBasis:
    ncomp = int(np.prod(shape)) if shape else 1
    basis = PolyBasis(cell.center, cell.diameter, degree, _identity_coeffs(degree, ncomp), shape, name)
    if orthonormal and basis.dim:
        basis = basis.orthonormalized(cell.rule(2 * max(degree, 0)))
    return basis


def scalar_basis(cell: CellGeometry, degree: int, orthonormal: bool = True) -> PolyBasis:
    """P^degree(T); the first orthonormal function is constant, the others have zero mean."""
    return _tensor_basis(cell, degree, (), f"P{degree}", orthonormal)


def vector_basis(cell: CellGeometry, degree: int, orthonormal: bool = True) -> PolyBasis:
    return _tensor_basis(cell, degree, (2,), f"P{degree}^2", orthonormal)


def matrix_basis(cell: CellGeometry, degree: int, orthonormal: bool = True) -> PolyBasis:
    return _tensor_basis(cell, degree, (2, 2), f"P{degree}^2x2", orthonormal)


class FaceBasis:
    """Orthonormal P^degree(F) (scalar, or componentwise vector) on a straight face."""

    def __init__(self, face: FaceGeometry, degree: int, ncomp: int = 1):
        self.face = face
        self.degree = degree
        self.ncomp = ncomp
        self.nscalar = max(degree + 1, 0)

    @property
    def dim(self) -> int:
        return self.ncomp * self.nscalar

    def __len__(self) -> int:
        return self.dim

    def scalar_values(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        """Scalar functions, shape (nscalar, q)."""
        if self.nscalar == 0:
            return np.zeros((0, len(points)))
        s = ((np.asarray(points, dtype=float) - self.face.midpoint) @ self.face.tangent) / self.face.length
        scaling = np.sqrt((2 * np.arange(self.nscalar) + 1) / self.face.length)
        return (legvander(2.0 * s, self.degree) * scaling[None, :]).T

    def values(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        """Values, shape (dim, q, ncomp)."""
        scalar = self.scalar_values(points)
        out = np.zeros((self.dim, scalar.shape[1], self.ncomp))
        for c in range(self.ncomp):
            out[c * self.nscalar : (c + 1) * self.nscalar, :, c] = scalar
        return out

    def gram(self, rule: QuadRule) -> NDArray[np.float64]:
        vals = self.values(rule.points)
        return np.einsum("iqc,jqc,q->ij", vals, vals, rule.weights)
