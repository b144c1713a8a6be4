"""
Projectors and moment interpolators onto local polynomial spaces.

Every interpolator exposes the same two entry points:

- ``matrix_for(source)`` maps coefficients in a source ``PolyBasis`` to target coefficients;
- ``apply(field, degree)`` interpolates a callable field given in local coordinates.

Moment interpolators assemble the matrix of their degree-of-freedom functionals against the target
basis and solve with it; unisolvence is checked when the interpolator is built.
"""

from collections.abc import Callable

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .polynomials import BasisError, FaceBasis, PolyBasis, vector_basis
from .quadrature import QuadRule
from .spaces import bdfm_basis, nedelec_basis, rtn_basis
from .types import CellGeometry

Field = Callable[[NDArray[np.float64]], NDArray[np.float64]]

UNISOLVENCE_CONDITION_LIMIT = 1e12


class UnisolvenceError(BasisError):
    """Raised when degree-of-freedom functionals do not determine the target space."""

    def __init__(self, what: str, reason: str):
        super().__init__(what, f"degrees of freedom are not unisolvent ({reason})")


def _as_family(values: NDArray[np.float64]) -> NDArray[np.float64]:
    """Field values (q,) / (q, c) -> (1, q, c)."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    return values[None, :, :]


def l2_project(field: Field, basis: PolyBasis, rule: QuadRule) -> NDArray[np.float64]:
    """Coefficients of the L2-orthogonal projection of ``field`` onto ``basis``."""
    vals = basis.values(rule.points)
    rhs = np.einsum("iqc,qc,q->i", vals, _as_family(field(rule.points))[0], rule.weights)
    gram = np.einsum("iqc,jqc,q->ij", vals, vals, rule.weights)
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), rhs)
    except np.linalg.LinAlgError as e:
        raise BasisError(basis.name, "singular Gram matrix") from e


class L2Projector:
    """pi_X onto a cell basis X."""

    def __init__(self, cell: CellGeometry, target: PolyBasis):
        self.cell = cell
        self.target = target
        self._rule = cell.rule(2 * target.degree)
        gram = target.gram(self._rule)
        try:
            self._factor = scipy.linalg.cho_factor(gram)
        except np.linalg.LinAlgError as e:
            raise BasisError(target.name, "singular Gram matrix") from e

    def _solve(self, rhs: NDArray[np.float64]) -> NDArray[np.float64]:
        return scipy.linalg.cho_solve(self._factor, rhs)

    def matrix_for(self, source: PolyBasis) -> NDArray[np.float64]:
        rule = self.cell.rule(self.target.degree + source.degree)
        rhs = np.einsum("iqc,jqc,q->ij", self.target.values(rule.points), source.values(rule.points), rule.weights)
        return self._solve(rhs)

    def apply(self, field: Field, degree: int) -> NDArray[np.float64]:
        rule = self.cell.rule(self.target.degree + degree)
        vals = _as_family(field(rule.points))
        rhs = np.einsum("iqc,jqc,q->i", self.target.values(rule.points), vals, rule.weights)
        return self._solve(rhs)


class FaceProjector:
    """pi onto an orthonormal face basis, for traces of cell functions and fields."""

    def __init__(self, cell: CellGeometry, face: int, target: FaceBasis):
        self.cell = cell
        self.face = face
        self.target = target

    def matrix_for(self, source: PolyBasis) -> NDArray[np.float64]:
        rule = self.cell.face_rule(self.face, self.target.degree + source.degree)
        return np.einsum("iqc,jqc,q->ij", self.target.values(rule.points), source.values(rule.points), rule.weights)

    def apply(self, field: Field, degree: int) -> NDArray[np.float64]:
        rule = self.cell.face_rule(self.face, max(self.target.degree, 0) + degree)
        vals = _as_family(field(rule.points))
        return np.einsum("iqc,jqc,q->i", self.target.values(rule.points), vals, rule.weights)


class MomentInterpolator:
    """
    Interpolator defined by normal-trace face moments and interior moments.

    Functionals, in order: for each face F of the cell, int_F (v . n_TF) phi for phi in the
    orthonormal P^face_degree(F); then int_T v . psi for psi in ``interior``.
    """

    def __init__(
        self,
        cell: CellGeometry,
        target: PolyBasis,
        face_degree: int,
        interior: PolyBasis | None,
        name: str,
    ):
        self.cell = cell
        self.target = target
        self.face_degree = face_degree
        self.interior = interior
        self.name = name
        self._face_bases = [FaceBasis(face, face_degree) for face in cell.faces]

        n_dofs = sum(fb.dim for fb in self._face_bases) + (interior.dim if interior is not None else 0)
        if n_dofs != target.dim:
            raise UnisolvenceError(name, f"{n_dofs} functionals for a space of dimension {target.dim}")
        dof_matrix = self._functionals(target.values, target.degree)
        self.condition = float(np.linalg.cond(dof_matrix))
        if not np.isfinite(self.condition) or self.condition > UNISOLVENCE_CONDITION_LIMIT:
            raise UnisolvenceError(name, f"condition number {self.condition:.3e}")
        self._lu = scipy.linalg.lu_factor(dof_matrix)

    def _functionals(self, evaluate: Field, degree: int) -> NDArray[np.float64]:
        """Functional values, shape (n_dofs, n_functions), of a family of vector functions."""
        blocks = []
        for f, (face, fb) in enumerate(zip(self.cell.faces, self._face_bases, strict=True)):
            if fb.dim == 0:
                continue
            rule = self.cell.face_rule(f, self.face_degree + degree)
            normal_trace = evaluate(rule.points) @ face.outward_normal
            blocks.append(np.einsum("iq,jq,q->ij", fb.scalar_values(rule.points), normal_trace, rule.weights))
        if self.interior is not None and self.interior.dim:
            rule = self.cell.rule(self.interior.degree + degree)
            blocks.append(
                np.einsum("iqc,jqc,q->ij", self.interior.values(rule.points), evaluate(rule.points), rule.weights)
            )
        return np.vstack(blocks)

    def matrix_for(self, source: PolyBasis) -> NDArray[np.float64]:
        return scipy.linalg.lu_solve(self._lu, self._functionals(source.values, source.degree))

    def moments(self, field: Field, degree: int) -> NDArray[np.float64]:
        """Values of all degree-of-freedom functionals on ``field``."""
        return self._functionals(lambda pts: _as_family(field(pts)), degree)[:, 0]

    def apply(self, field: Field, degree: int) -> NDArray[np.float64]:
        return scipy.linalg.lu_solve(self._lu, self.moments(field, degree))

    def face_moment_count(self) -> int:
        return sum(fb.dim for fb in self._face_bases)


class EmbeddedInterpolator:
    """An interpolator into a subspace, expressed in the coefficients of a larger basis."""

    def __init__(self, cell: CellGeometry, inner: MomentInterpolator, target: PolyBasis):
        self.cell = cell
        self.inner = inner
        self.target = target
        self.name = f"{inner.name} in {target.name}"
        self._embedding = L2Projector(cell, target).matrix_for(inner.target)

    def matrix_for(self, source: PolyBasis) -> NDArray[np.float64]:
        return self._embedding @ self.inner.matrix_for(source)

    def apply(self, field: Field, degree: int) -> NDArray[np.float64]:
        return self._embedding @ self.inner.apply(field, degree)


Interpolator = L2Projector | MomentInterpolator | EmbeddedInterpolator


def bdm_interpolator(cell: CellGeometry, degree: int, target: PolyBasis | None = None) -> MomentInterpolator:
    """I_BDM^degree: face moments against P^degree(F), interior moments against N^(degree-1)(T)."""
    if degree < 1:
        error_msg = f"BDM degree must be at least 1, got {degree}"
        raise ValueError(error_msg)
    target = target if target is not None else vector_basis(cell, degree)
    return MomentInterpolator(cell, target, degree, nedelec_basis(cell, degree - 1), f"BDM{degree}")


def rtn_interpolator(cell: CellGeometry, degree: int, target: PolyBasis | None = None) -> MomentInterpolator:
    """I_RTN^degree: face moments against P^(degree-1)(F), interior moments against P^(degree-2)(T)^2."""
    target = target if target is not None else rtn_basis(cell, degree)
    interior = vector_basis(cell, degree - 2) if degree >= 2 else None
    return MomentInterpolator(cell, target, degree - 1, interior, f"RTN{degree}")


def bdfm_interpolator(cell: CellGeometry, degree: int, target: PolyBasis | None = None) -> MomentInterpolator:
    """I_BDFM^degree: same functionals as I_RTN^degree, on rectangles."""
    target = target if target is not None else bdfm_basis(cell, degree)
    interior = vector_basis(cell, degree - 2) if degree >= 2 else None
    return MomentInterpolator(cell, target, degree - 1, interior, f"BDFM{degree}")


def interp_bdm(v: Field, degree: int, cell: CellGeometry, field_degree: int = 16) -> NDArray[np.float64]:
    """Coefficients of I_BDM^degree v in the orthonormal P^degree(T)^2 basis."""
    return bdm_interpolator(cell, degree).apply(v, field_degree)


def interp_rtn(v: Field, degree: int, cell: CellGeometry, field_degree: int = 16) -> NDArray[np.float64]:
    """Coefficients of I_RTN^degree v in the RTN generator basis."""
    return rtn_interpolator(cell, degree).apply(v, field_degree)


def interp_bdfm(v: Field, degree: int, cell: CellGeometry, field_degree: int = 16) -> NDArray[np.float64]:
    """Coefficients of I_BDFM^degree v in the BDFM generator basis."""
    return bdfm_interpolator(cell, degree).apply(v, field_degree)
