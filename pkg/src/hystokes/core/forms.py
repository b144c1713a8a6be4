"""
Local bilinear forms as dense matrices over the local hybrid layout.

``LocalFormSet.a`` acts on the velocity part, ``b`` maps velocity to pressure test functions
(rows: pressure dofs, columns: velocity dofs) and ``d`` acts on the pressure part.
"""

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .localops import LocalOperators, LocalSpaces
from .types import StabilizationKind


class StabilizationError(ValueError):
    def __init__(self, reason: str):
        super().__init__(f"Invalid stabilization: {reason}")


@dataclass(frozen=True)
class Stabilization:
    kind: StabilizationKind
    eta: float | None = None  # rhebergen_wells only

    def __post_init__(self) -> None:
        if self.kind is StabilizationKind.RHEBERGEN_WELLS and (self.eta is None or self.eta <= 0):
            raise StabilizationError(f"rhebergen_wells needs eta > 0, got {self.eta}")


@dataclass(frozen=True)
class LocalFormSet:
    a: NDArray[np.float64]  # (n_velocity, n_velocity)
    b: NDArray[np.float64]  # (n_pressure, n_velocity)
    d: NDArray[np.float64]  # (n_pressure, n_pressure)
    s: NDArray[np.float64]  # stabilization part of a


def coupling_form(spaces: LocalSpaces, ops: LocalOperators) -> NDArray[np.float64]:
    """b_T(v, q) = int_T G_T q . v_T."""
    return ops.pgrad.matrix.T @ spaces.mass(spaces.ut) @ spaces.ut_selector()


def face_flux_form(spaces: LocalSpaces) -> NDArray[np.float64]:
    """
    sum_F int_F (v_F . n_TF) q_F. Cancels in the sum over cells: v_F and q_F are single-valued and
    v_F = 0 on boundary faces.
    """
    layout = spaces.layout
    flux = np.zeros((layout.n_pressure, layout.n_velocity))
    for f, face in enumerate(spaces.cell.faces):
        fr = spaces.face_rule(f)
        normal_trace = spaces.uf_bases[f].values(fr.points) @ face.outward_normal
        flux[layout.pf_slice(f), layout.uf_slice(f)] = np.einsum(
            "iq,jq,q->ij", spaces.pf_bases[f].scalar_values(fr.points), normal_trace, fr.weights
        )
    return flux


def coupling_form_bis(spaces: LocalSpaces, ops: LocalOperators) -> NDArray[np.float64]:
    """
    b_T(v, q) = -int_T D_T v q_T + sum_F int_F (v_T - v_F) . n_TF (q_F - q_T) + sum_F int_F (v_F . n_TF) q_F.

    The last sum vanishes in b_h, leaving the familiar two-term reformulation.
    """
    layout = spaces.layout
    b = np.zeros((layout.n_pressure, layout.n_velocity))
    b[layout.pt_slice] = -spaces.mass(spaces.pt) @ ops.div.matrix
    for f, face in enumerate(spaces.cell.faces):
        fr = spaces.face_rule(f)
        jump_n = -spaces.velocity_jump(f, fr.points) @ face.outward_normal
        b += np.einsum("iq,jq,q->ij", spaces.pressure_jump(f, fr.points), jump_n, fr.weights)
    return b + face_flux_form(spaces)


def _face_jump_gram(spaces: LocalSpaces) -> NDArray[np.float64]:
    """sum_F h_F^-1 int_F (w_F - w_T) . (v_F - v_T)."""
    n = spaces.layout.n_velocity
    gram = np.zeros((n, n))
    for f, face in enumerate(spaces.cell.faces):
        fr = spaces.face_rule(f)
        jump = spaces.velocity_jump(f, fr.points)
        gram += np.einsum("iqc,jqc,q->ij", jump, jump, fr.weights) / face.length
    return gram


def gradient_in_sigma(spaces: LocalSpaces) -> NDArray[np.float64]:
    """Coefficients in Sigma_T of grad v_T (exact when grad U_T is contained in Sigma_T)."""
    rule = spaces.rule
    sigma = spaces.sigma
    tau = sigma.values(rule.points).reshape(sigma.dim, len(rule.points), 2, 2)
    rhs = np.zeros((sigma.dim, spaces.layout.n_velocity))
    rhs[:, spaces.layout.ut_slice] = np.einsum(
        "iqab,jqab,q->ij", tau, spaces.ut.gradients(rule.points), rule.weights
    )
    return np.linalg.solve(spaces.mass(sigma), rhs)


def classical_stabilization(spaces: LocalSpaces, ops: LocalOperators) -> NDArray[np.float64]:
    """lambda_T h_T^-2 int_T delta_T w . delta_T v + sum_F h_F^-1 int_F delta_TF w . delta_TF v."""
    h = spaces.cell.diameter
    delta_t = ops.diff.cell.matrix
    s = spaces.lambda_t / h**2 * delta_t.T @ spaces.mass(spaces.ut) @ delta_t
    for f, face in enumerate(spaces.cell.faces):
        delta_f = ops.diff.faces[f].matrix
        face_mass = spaces.uf_bases[f].gram(spaces.face_rule(f))
        s += delta_f.T @ face_mass @ delta_f / face.length
    return s


def boxed_term(spaces: LocalSpaces, nu: float) -> NDArray[np.float64]:
    """nu^-1 lambda_T h_T^-2 int_T (w_T - I_{U,T} w_T) . (v_T - I_{U,T} v_T)."""
    sel = spaces.ut_selector()
    defect = sel - spaces.iut.matrix_for(spaces.ut) @ sel
    h = spaces.cell.diameter
    return spaces.lambda_t / (nu * h**2) * defect.T @ spaces.mass(spaces.ut) @ defect


def rw_stabilization(spaces: LocalSpaces, ops: LocalOperators, eta: float) -> NDArray[np.float64]:
    """-int_T (E_T w - grad w_T) : (E_T v - grad v_T) + eta sum_F h_F^-1 int_F (w_F - w_T) . (v_F - v_T)."""
    defect = ops.vgrad.matrix - gradient_in_sigma(spaces)
    return -defect.T @ spaces.mass(spaces.sigma) @ defect + eta * _face_jump_gram(spaces)


def rw_direct_form(spaces: LocalSpaces, eta: float) -> NDArray[np.float64]:
    """
    Interior-penalty form: int_T grad w_T : grad v_T + sum_F int_F (w_F - w_T) . (grad v_T n_TF)
    + sum_F int_F (grad w_T n_TF) . (v_F - v_T) + eta sum_F h_F^-1 int_F (w_F - w_T) . (v_F - v_T).
    """
    layout = spaces.layout
    n = layout.n_velocity
    rule = spaces.rule
    grads = np.zeros((n, len(rule.points), 2, 2))
    grads[layout.ut_slice] = spaces.ut.gradients(rule.points)
    a = np.einsum("iqab,jqab,q->ij", grads, grads, rule.weights)
    for f, face in enumerate(spaces.cell.faces):
        fr = spaces.face_rule(f)
        face_grads = np.zeros((n, len(fr.points), 2, 2))
        face_grads[layout.ut_slice] = spaces.ut.gradients(fr.points)
        flux = np.einsum("iqab,b->iqa", face_grads, face.outward_normal)
        consistency = np.einsum("iqa,jqa,q->ij", spaces.velocity_jump(f, fr.points), flux, fr.weights)
        a += consistency + consistency.T
    return a + eta * _face_jump_gram(spaces)


def viscous_form(
    spaces: LocalSpaces, ops: LocalOperators, stabilization: Stabilization, nu: float = 1.0
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """a_T = int_T E_T w : E_T v + s_T(w, v); returns (a_T, s_T)."""
    vgrad = ops.vgrad.matrix
    consistency = vgrad.T @ spaces.mass(spaces.sigma) @ vgrad
    if stabilization.kind is StabilizationKind.RHEBERGEN_WELLS:
        assert stabilization.eta is not None
        s = rw_stabilization(spaces, ops, stabilization.eta)
    else:
        s = classical_stabilization(spaces, ops)
        if stabilization.kind is StabilizationKind.HHO_BOXED:
            s = s + boxed_term(spaces, nu)
    a = consistency + s
    return 0.5 * (a + a.T), 0.5 * (s + s.T)


def pressure_stab_form(spaces: LocalSpaces) -> NDArray[np.float64]:
    """d_T(p, q) = sum_F h_F int_F (p_F - p_T)(q_F - q_T)."""
    n = spaces.layout.n_pressure
    d = np.zeros((n, n))
    for f, face in enumerate(spaces.cell.faces):
        fr = spaces.face_rule(f)
        jump = spaces.pressure_jump(f, fr.points)
        d += face.length * np.einsum("iq,jq,q->ij", jump, jump, fr.weights)
    return d


def local_forms(
    spaces: LocalSpaces, ops: LocalOperators, stabilization: Stabilization, nu: float, with_pressure_stab: bool
) -> LocalFormSet:
    a, s = viscous_form(spaces, ops, stabilization, nu)
    n_p = spaces.layout.n_pressure
    d = pressure_stab_form(spaces) if with_pressure_stab else np.zeros((n_p, n_p))
    return LocalFormSet(a=a, b=coupling_form(spaces, ops), d=d, s=s)

