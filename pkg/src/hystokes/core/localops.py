"""
Element-local reconstruction operators.

Each operator is a dense matrix acting on the local hybrid coefficients of one cell (velocity part
``[u_T, u_F1, ..., u_Fn]`` or pressure part ``[p_T, p_F1, ..., p_Fn]``) and returning coefficients
in a target cell basis:

- ``div_op``   D_T : velocity -> P_T
- ``pgrad_op`` G_T : pressure -> U_T
- ``vgrad_op`` E_T : velocity -> Sigma_T
- ``recon_op`` r_T : velocity -> W_T
- ``diff_ops`` delta_T : velocity -> U_T and delta_TF : velocity -> U_F
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .interpolators import FaceProjector, Interpolator
from .polynomials import BasisError, FaceBasis, PolyBasis
from .quadrature import QuadRule
from .types import CellGeometry, ClosureCase, LocalDofLayout

CONSTANT_GRADIENT_TOLERANCE = 1e-12


@dataclass
class LocalSpaces:
    """The local spaces of one method on one cell, plus the interpolator I_{U,T}."""

    cell: CellGeometry
    k: int
    ut: PolyBasis
    uf_degree: int
    pt: PolyBasis
    pf_degree: int
    sigma: PolyBasis
    w: PolyBasis
    iut: Interpolator
    closure: ClosureCase
    quad_degree: int
    face_ids: tuple[int, ...] = ()
    _masses: dict[int, tuple[PolyBasis, NDArray[np.float64]]] = field(default_factory=dict, repr=False)

    @cached_property
    def layout(self) -> LocalDofLayout:
        return LocalDofLayout(
            n_ut=self.ut.dim,
            n_uf=2 * max(self.uf_degree + 1, 0),
            n_pt=self.pt.dim,
            n_pf=max(self.pf_degree + 1, 0),
            n_faces=self.cell.n_faces,
            face_ids=self.face_ids,
        )

    @cached_property
    def uf_bases(self) -> tuple[FaceBasis, ...]:
        return tuple(FaceBasis(face, self.uf_degree, ncomp=2) for face in self.cell.faces)

    @cached_property
    def pf_bases(self) -> tuple[FaceBasis, ...]:
        return tuple(FaceBasis(face, self.pf_degree) for face in self.cell.faces)

    @property
    def rule(self) -> QuadRule:
        return self.cell.rule(self.quad_degree)

    def face_rule(self, face: int) -> QuadRule:
        return self.cell.face_rule(face, self.quad_degree)

    def mass(self, basis: PolyBasis) -> NDArray[np.float64]:
        cached = self._masses.get(id(basis))
        if cached is None or cached[0] is not basis:
            cached = (basis, basis.gram(self.rule))
            self._masses[id(basis)] = cached
        return cached[1]

    @cached_property
    def lambda_t(self) -> float:
        """card(F_T) h_T^2 / |T|."""
        return self.cell.n_faces * self.cell.diameter**2 / self.cell.area

    # Evaluation of local hybrid functions

    def ut_selector(self) -> NDArray[np.float64]:
        sel = np.zeros((self.layout.n_ut, self.layout.n_velocity))
        sel[:, self.layout.ut_slice] = np.eye(self.layout.n_ut)
        return sel

    def uf_selector(self, face: int) -> NDArray[np.float64]:
        sel = np.zeros((self.layout.n_uf, self.layout.n_velocity))
        sel[:, self.layout.uf_slice(face)] = np.eye(self.layout.n_uf)
        return sel

    def velocity_jump(self, face: int, points: NDArray[np.float64]) -> NDArray[np.float64]:
        """(v_F - v_T) at ``points`` for every local velocity dof, shape (n_velocity, q, 2)."""
        out = np.zeros((self.layout.n_velocity, len(points), 2))
        out[self.layout.ut_slice] = -self.ut.values(points)
        out[self.layout.uf_slice(face)] = self.uf_bases[face].values(points)
        return out

    def pressure_jump(self, face: int, points: NDArray[np.float64]) -> NDArray[np.float64]:
        """(q_F - q_T) at ``points`` for every local pressure dof, shape (n_pressure, q)."""
        out = np.zeros((self.layout.n_pressure, len(points)))
        out[self.layout.pt_slice] = -self.pt.values(points)[:, :, 0]
        out[self.layout.pf_slice(face)] = self.pf_bases[face].scalar_values(points)
        return out


@dataclass(frozen=True)
class LocalOperator:
    matrix: NDArray[np.float64]  # (target dim, source dofs)
    target: str
    source: str  # "velocity" or "pressure"

    def __matmul__(self, coefficients: NDArray[np.float64]) -> NDArray[np.float64]:
        return self.matrix @ coefficients

    @property
    def shape(self) -> tuple[int, int]:
        return (self.matrix.shape[0], self.matrix.shape[1])


def _mass_solve(spaces: LocalSpaces, basis: PolyBasis, rhs: NDArray[np.float64]) -> NDArray[np.float64]:
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(spaces.mass(basis)), rhs)
    except np.linalg.LinAlgError as e:
        raise BasisError(basis.name, "singular mass matrix") from e


def _matrix_values(basis: PolyBasis, points: NDArray[np.float64]) -> NDArray[np.float64]:
    return basis.values(points).reshape(basis.dim, len(points), 2, 2)


def _gradient_pairing(
    spaces: LocalSpaces, tau: PolyBasis | None, use_gradients_of: PolyBasis | None = None
) -> NDArray[np.float64]:
    """
    Rows: int_T grad v_T : tau + sum_F int_F (v_F - v_T) . (tau n_TF) for each tau in the family.

    The family is either a matrix-valued basis ``tau`` or the gradients of a vector basis.
    """
    layout = spaces.layout

    def family(points: NDArray[np.float64]) -> NDArray[np.float64]:
        if use_gradients_of is not None:
            return use_gradients_of.gradients(points)
        assert tau is not None
        return _matrix_values(tau, points)

    rule = spaces.rule
    fam = family(rule.points)
    rhs = np.zeros((fam.shape[0], layout.n_velocity))
    rhs[:, layout.ut_slice] = np.einsum("iqab,jqab,q->ij", fam, spaces.ut.gradients(rule.points), rule.weights)
    for f, face in enumerate(spaces.cell.faces):
        fr = spaces.face_rule(f)
        tau_n = np.einsum("iqab,b->iqa", family(fr.points), face.outward_normal)
        rhs += np.einsum("iqa,jqa,q->ij", tau_n, spaces.velocity_jump(f, fr.points), fr.weights)
    return rhs


def div_op(spaces: LocalSpaces) -> LocalOperator:
    """D_T: int_T D_T v q = -int_T v_T . grad q + sum_F int_F (v_F . n_TF) q for q in P_T."""
    layout = spaces.layout
    rule = spaces.rule
    grad_q = spaces.pt.gradients(rule.points)[:, :, 0, :]
    rhs = np.zeros((layout.n_pt, layout.n_velocity))
    rhs[:, layout.ut_slice] = -np.einsum("iqd,jqd,q->ij", grad_q, spaces.ut.values(rule.points), rule.weights)
    for f, face in enumerate(spaces.cell.faces):
        fr = spaces.face_rule(f)
        q = spaces.pt.values(fr.points)[:, :, 0]
        vn = spaces.uf_bases[f].values(fr.points) @ face.outward_normal
        rhs[:, layout.uf_slice(f)] = np.einsum("iq,jq,q->ij", q, vn, fr.weights)
    return LocalOperator(_mass_solve(spaces, spaces.pt, rhs), spaces.pt.name, "velocity")


def pgrad_op(spaces: LocalSpaces) -> LocalOperator:
    """G_T: int_T G_T q . v = -int_T q_T div v + sum_F int_F q_F (v . n_TF) for v in U_T."""
    layout = spaces.layout
    rule = spaces.rule
    rhs = np.zeros((layout.n_ut, layout.n_pressure))
    rhs[:, layout.pt_slice] = -np.einsum(
        "iq,jq,q->ij", spaces.ut.divergences(rule.points), spaces.pt.values(rule.points)[:, :, 0], rule.weights
    )
    for f, face in enumerate(spaces.cell.faces):
        fr = spaces.face_rule(f)
        vn = spaces.ut.values(fr.points) @ face.outward_normal
        q = spaces.pf_bases[f].scalar_values(fr.points)
        rhs[:, layout.pf_slice(f)] = np.einsum("iq,jq,q->ij", vn, q, fr.weights)
    return LocalOperator(_mass_solve(spaces, spaces.ut, rhs), spaces.ut.name, "pressure")


def vgrad_op(spaces: LocalSpaces, sigma: PolyBasis | None = None) -> LocalOperator:
    """E_T: int_T E_T v : tau = int_T grad v_T : tau + sum_F int_F (v_F - v_T) . (tau n_TF)."""
    sigma = sigma if sigma is not None else spaces.sigma
    rhs = _gradient_pairing(spaces, sigma)
    return LocalOperator(_mass_solve(spaces, sigma, rhs), sigma.name, "velocity")


def vgrad_op_divergence_form(spaces: LocalSpaces, sigma: PolyBasis | None = None) -> LocalOperator:
    """E_T from its first definition: -int_T v_T . div tau + sum_F int_F v_F . (tau n_TF)."""
    sigma = sigma if sigma is not None else spaces.sigma
    layout = spaces.layout
    rule = spaces.rule
    # div of a matrix field: (div tau)_a = sum_b d_b tau_ab
    grads = sigma.gradients(rule.points).reshape(sigma.dim, len(rule.points), 2, 2, 2)
    div_tau = np.einsum("iqabb->iqa", grads)
    rhs = np.zeros((sigma.dim, layout.n_velocity))
    rhs[:, layout.ut_slice] = -np.einsum("iqa,jqa,q->ij", div_tau, spaces.ut.values(rule.points), rule.weights)
    for f, face in enumerate(spaces.cell.faces):
        fr = spaces.face_rule(f)
        tau_n = np.einsum("iqab,b->iqa", _matrix_values(sigma, fr.points), face.outward_normal)
        rhs[:, layout.uf_slice(f)] = np.einsum(
            "iqa,jqa,q->ij", tau_n, spaces.uf_bases[f].values(fr.points), fr.weights
        )
    return LocalOperator(_mass_solve(spaces, sigma, rhs), sigma.name, "velocity")


def constant_indices(spaces: LocalSpaces) -> NDArray[np.int64]:
    """Indices of the constant functions of the (orthonormal) W_T basis."""
    grads = spaces.w.gradients(spaces.rule.points)
    stiffness = np.einsum("iqab,iqab,q->i", grads, grads, spaces.rule.weights)
    return np.flatnonzero(stiffness <= CONSTANT_GRADIENT_TOLERANCE * stiffness.max())


def recon_op(spaces: LocalSpaces) -> LocalOperator:
    """
    r_T into W_T: int_T grad r_T v : grad w = int_T grad v_T : grad w + sum_F int_F (v_F - v_T) . grad w n_TF
    for all w, closed by fixing the mean of r_T v according to ``spaces.closure``.
    """
    layout = spaces.layout
    w = spaces.w
    rule = spaces.rule
    grads = w.gradients(rule.points)
    stiffness = np.einsum("iqab,jqab,q->ij", grads, grads, rule.weights)
    rhs = _gradient_pairing(spaces, None, use_gradients_of=w)

    constants = constant_indices(spaces)
    if len(constants) != 2:
        raise BasisError(w.name, f"expected 2 constant functions, found {len(constants)}")
    free = np.setdiff1d(np.arange(w.dim), constants)

    matrix = np.zeros((w.dim, layout.n_velocity))
    try:
        factor = scipy.linalg.cho_factor(stiffness[np.ix_(free, free)])
    except np.linalg.LinAlgError as e:
        raise BasisError(w.name, "singular stiffness on the complement of constants") from e
    matrix[free] = scipy.linalg.cho_solve(factor, rhs[free])

    # Non-constant members of the orthonormal W_T basis have zero mean, so only the constant
    # coefficients carry the mean of r_T v.
    const_vals = w.values(rule.points)[constants]
    const_mass = np.einsum("iqc,iqc,q->i", const_vals, const_vals, rule.weights)
    if spaces.closure is ClosureCase.CELL_AVERAGE:
        pairing = np.einsum("iqc,jqc,q->ij", const_vals, spaces.ut.values(rule.points), rule.weights)
        matrix[constants, layout.ut_slice] = pairing / const_mass[:, None]
    else:
        n_faces = spaces.cell.n_faces
        for f, face in enumerate(spaces.cell.faces):
            fr = spaces.face_rule(f)
            pairing = np.einsum(
                "iqc,jqc,q->ij", w.values(fr.points)[constants], spaces.uf_bases[f].values(fr.points), fr.weights
            )
            scale = spaces.cell.area / (n_faces * face.length)
            matrix[constants, layout.uf_slice(f)] = scale * pairing / const_mass[:, None]
    return LocalOperator(matrix, w.name, "velocity")


@dataclass(frozen=True)
class DifferenceOperators:
    cell: LocalOperator  # delta_T, coefficients in U_T
    faces: tuple[LocalOperator, ...]  # delta_TF, coefficients in U_F


def diff_ops(spaces: LocalSpaces, recon: LocalOperator | None = None) -> DifferenceOperators:
    """delta_T v = I_{U,T}(r_T v - v_T) and delta_TF v = pi_{U_F}(r_T v - v_F)."""
    recon = recon if recon is not None else recon_op(spaces)
    iw = spaces.iut.matrix_for(spaces.w)
    iu = spaces.iut.matrix_for(spaces.ut)
    cell_matrix = iw @ recon.matrix - iu @ spaces.ut_selector()
    faces = []
    for f in range(spaces.cell.n_faces):
        proj = FaceProjector(spaces.cell, f, spaces.uf_bases[f]).matrix_for(spaces.w)
        faces.append(LocalOperator(proj @ recon.matrix - spaces.uf_selector(f), f"U_F{f}", "velocity"))
    return DifferenceOperators(LocalOperator(cell_matrix, spaces.ut.name, "velocity"), tuple(faces))


@dataclass(frozen=True)
class LocalOperators:
    """All reconstructions of one cell."""

    div: LocalOperator
    pgrad: LocalOperator
    vgrad: LocalOperator
    recon: LocalOperator
    diff: DifferenceOperators


def build_operators(spaces: LocalSpaces) -> LocalOperators:
    recon = recon_op(spaces)
    return LocalOperators(
        div=div_op(spaces),
        pgrad=pgrad_op(spaces),
        vgrad=vgrad_op(spaces),
        recon=recon,
        diff=diff_ops(spaces, recon),
    )
