"""
Discrete norms of hybrid fields and the monitored error quantities.

Hybrid fields are global coefficient vectors in the ``DofMap`` ordering. Per-cell Gram matrices
are built once per local kernel (cells that differ by a translation share them).
"""

from dataclasses import asdict, dataclass, replace
from typing import Any

import numpy as np
from numpy.typing import NDArray

from ..core.forms import pressure_stab_form
from ..core.interpolators import FaceProjector, L2Projector
from ..core.localops import LocalSpaces, recon_op
from ..core.types import ClosureCase
from ..scheme.assembly import DofMap
from ..scheme.element import LocalElement, LocalKernel
from ..scheme.solver import HybridSolution
from ..utils.logger import get_logger
from .problems import Field, ProblemSpec

logger = get_logger(__name__)

ERROR_COLUMNS = ("e_1h", "e_grad_rec", "e_L2", "e_rec", "e_p")


def gram_1h(spaces: LocalSpaces) -> NDArray[np.float64]:
    """Local Gram matrix of ||grad v_T||^2 + h_T^-1 sum_F ||v_F - pi_{U_F} v_T||_F^2."""
    layout = spaces.layout
    n = layout.n_velocity
    rule = spaces.rule
    grads = spaces.ut.gradients(rule.points)
    gram = np.zeros((n, n))
    gram[layout.ut_slice, layout.ut_slice] = np.einsum("iqab,jqab,q->ij", grads, grads, rule.weights)
    jumps = np.zeros((n, n))
    for f, basis in enumerate(spaces.uf_bases):
        fr = spaces.face_rule(f)
        vals = basis.values(fr.points)
        face_mass = np.einsum("iqc,jqc,q->ij", vals, vals, fr.weights)
        trace = FaceProjector(spaces.cell, f, basis).matrix_for(spaces.ut)
        jump = spaces.uf_selector(f) - trace @ spaces.ut_selector()
        jumps += jump.T @ face_mass @ jump
    return gram + jumps / spaces.cell.diameter


@dataclass(frozen=True)
class LocalGrams:
    one_h: NDArray[np.float64]  # velocity part
    ut_mass: NDArray[np.float64]
    pt_mass: NDArray[np.float64]
    pressure_jumps: NDArray[np.float64]  # d_T, pressure part
    pgrad: NDArray[np.float64]  # G_T^T M_U G_T, pressure part
    pgrad_scaled: NDArray[np.float64]  # h_T^2 G_T^T M_U G_T


class NormCalculator:
    """Discrete norms over a list of elements, with per-kernel caching of the local Gram matrices."""

    def __init__(self, elements: list[LocalElement], dofmap: DofMap):
        self.elements = elements
        self.dofmap = dofmap
        self._grams: dict[int, LocalGrams] = {}

    def grams(self, element: LocalElement) -> LocalGrams:
        key = id(element.kernel)
        cached = self._grams.get(key)
        if cached is None:
            spaces = element.spaces
            pgrad = element.ops.pgrad.matrix
            mass_u = spaces.mass(spaces.ut)
            layout = spaces.layout
            pt_mass = np.zeros((layout.n_pressure, layout.n_pressure))
            pt_mass[layout.pt_slice, layout.pt_slice] = spaces.mass(spaces.pt)
            pgrad_gram = pgrad.T @ mass_u @ pgrad
            cached = LocalGrams(
                one_h=gram_1h(spaces),
                ut_mass=mass_u,
                pt_mass=pt_mass,
                pressure_jumps=pressure_stab_form(spaces),
                pgrad=pgrad_gram,
                pgrad_scaled=spaces.cell.diameter**2 * pgrad_gram,
            )
            self._grams[key] = cached
        return cached

    def velocity(self, element: LocalElement, x: NDArray[np.float64]) -> NDArray[np.float64]:
        idx = self.dofmap.velocity_indices(element)
        out = np.zeros(len(idx))
        keep = idx >= 0
        out[keep] = x[idx[keep]]
        return out

    def pressure(self, element: LocalElement, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return x[self.dofmap.pressure_indices(element)]

    def _sum(self, x: NDArray[np.float64], which: str, part: str) -> float:
        total = 0.0
        for element in self.elements:
            local = self.velocity(element, x) if part == "velocity" else self.pressure(element, x)
            matrix = getattr(self.grams(element), which)
            if which == "ut_mass":
                local = local[element.spaces.layout.ut_slice]
            total += float(local @ matrix @ local)
        return max(total, 0.0)

    def norm_1h(self, x: NDArray[np.float64]) -> float:
        return float(np.sqrt(self._sum(x, "one_h", "velocity")))

    def velocity_l2(self, x: NDArray[np.float64]) -> float:
        """||v_h||_{L2}, cell components only."""
        return float(np.sqrt(self._sum(x, "ut_mass", "velocity")))

    def pressure_l2(self, x: NDArray[np.float64]) -> float:
        return float(np.sqrt(self._sum(x, "pt_mass", "pressure")))

    def seminorm_0h(self, x: NDArray[np.float64]) -> float:
        """|q|_{0,h}^2 = sum_T sum_F h_F ||q_F - q_T||_F^2."""
        return float(np.sqrt(self._sum(x, "pressure_jumps", "pressure")))

    def pressure_gradient(self, x: NDArray[np.float64], scaled: bool = True) -> float:
        """(sum_T h_T^2 ||G_T q||^2)^(1/2), or ||G_h q|| with ``scaled=False``."""
        return float(np.sqrt(self._sum(x, "pgrad_scaled" if scaled else "pgrad", "pressure")))

    def norm_Ph(self, x: NDArray[np.float64]) -> float:
        return float(np.hypot(self.pressure_l2(x), self.pressure_gradient(x)))

    def norm_nuh(self, x: NDArray[np.float64], nu: float, delta: int) -> float:
        """||(v, q)||_{nu,h}^2 = nu ||v||_{1,h}^2 + nu^-1 ||q||_{P,h}^2 + delta nu^-1 |q|_{0,h}^2."""
        value = nu * self.norm_1h(x) ** 2 + self.norm_Ph(x) ** 2 / nu
        if delta:
            value += delta * self.seminorm_0h(x) ** 2 / nu
        return float(np.sqrt(value))


def norm_1h(elements: list[LocalElement], dofmap: DofMap, x: NDArray[np.float64]) -> float:
    return NormCalculator(elements, dofmap).norm_1h(x)


def seminorm_0h(elements: list[LocalElement], dofmap: DofMap, x: NDArray[np.float64]) -> float:
    return NormCalculator(elements, dofmap).seminorm_0h(x)


def norm_Ph(elements: list[LocalElement], dofmap: DofMap, x: NDArray[np.float64]) -> float:
    return NormCalculator(elements, dofmap).norm_Ph(x)


def norm_nuh(elements: list[LocalElement], dofmap: DofMap, x: NDArray[np.float64], nu: float, delta: int) -> float:
    return NormCalculator(elements, dofmap).norm_nuh(x, nu, delta)


# Interpolation of exact fields


class _KernelProjectors:
    def __init__(self, kernel: LocalKernel):
        spaces = kernel.spaces
        self.pt = L2Projector(spaces.cell, spaces.pt)
        self.uf = [FaceProjector(spaces.cell, f, fb) for f, fb in enumerate(spaces.uf_bases)]
        self.pf = [FaceProjector(spaces.cell, f, fb) for f, fb in enumerate(spaces.pf_bases)]


def _shifted(field: Field, element: LocalElement) -> Field:
    def local(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return field(element.to_global(points))

    return local


def interpolate_exact(
    elements: list[LocalElement], dofmap: DofMap, u: Field, p: Field | None = None, degree: int = 16
) -> NDArray[np.float64]:
    """
    Global hybrid interpolate: I_{U,T} u on cells, L2 projections on faces (velocity on internal
    faces only), L2 projections of ``p`` for the pressure components.
    """
    x = np.zeros(dofmap.size)
    projectors: dict[int, _KernelProjectors] = {}
    for element in elements:
        key = id(element.kernel)
        proj = projectors.get(key)
        if proj is None:
            proj = projectors[key] = _KernelProjectors(element.kernel)
        local_u = _shifted(u, element)
        x[dofmap.ut(element.index)] = element.spaces.iut.apply(local_u, degree)
        for f, face in enumerate(element.faces):
            idx = dofmap.uf(face)
            if idx is not None:
                x[idx] = proj.uf[f].apply(local_u, degree)
        if p is not None:
            local_p = _shifted(p, element)
            x[dofmap.pt(element.index)] = proj.pt.apply(local_p, degree)
            for f, face in enumerate(element.faces):
                x[dofmap.pf(face)] = proj.pf[f].apply(local_p, degree)
    return x


@dataclass(frozen=True)
class ErrorReport:
    e_1h: float
    e_grad_rec: float
    e_L2: float
    e_rec: float
    e_p: float
    e_grad_p: float  # ||G_h(p_h - I_P p)||
    p_seminorm: float  # |p_h - I_P p|_{0,h}
    p_norm_Ph: float  # ||p_h - I_P p||_{P,h}
    energy: float  # ||(u_h - I_U u, p_h - I_P p)||_{nu,h}
    h: float
    size: int
    full_size: int

    def errors(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in ERROR_COLUMNS)

    def to_row(self) -> dict[str, Any]:
        return asdict(self)


def reporting_reconstruction(element: LocalElement) -> NDArray[np.float64]:
    """
    r_T used for e_rec and e_grad_rec. At k = 0 its mean always comes from the face averages of
    v_F; for k >= 1 it is the method's own r_T.
    """
    spaces = element.spaces
    if spaces.k == 0 and spaces.closure is ClosureCase.CELL_AVERAGE:
        return recon_op(replace(spaces, closure=ClosureCase.FACE_AVERAGE)).matrix
    return element.ops.recon.matrix


def reconstruction_errors(
    elements: list[LocalElement], dofmap: DofMap, x: NDArray[np.float64], u: Field, grad_u: Field, degree: int = 16
) -> tuple[float, float]:
    """(||r_h v - u||_{L2}, ||grad_h(r_h v - u)||_{L2}) with cell-wise quadrature of ``degree``."""
    calc = NormCalculator(elements, dofmap)
    recons: dict[int, NDArray[np.float64]] = {}
    l2 = 0.0
    h1 = 0.0
    for element in elements:
        spaces = element.spaces
        w = spaces.w
        rule = spaces.cell.rule(degree)
        key = id(element.kernel)
        if key not in recons:
            recons[key] = reporting_reconstruction(element)
        r = recons[key] @ calc.velocity(element, x)
        global_points = element.to_global(rule.points)
        diff = np.einsum("i,iqc->qc", r, w.values(rule.points)) - u(global_points)
        grad_diff = np.einsum("i,iqcd->qcd", r, w.gradients(rule.points)) - grad_u(global_points)
        l2 += float(np.einsum("qc,qc,q->", diff, diff, rule.weights))
        h1 += float(np.einsum("qcd,qcd,q->", grad_diff, grad_diff, rule.weights))
    return float(np.sqrt(l2)), float(np.sqrt(h1))


def error_report(
    solution: HybridSolution,
    elements: list[LocalElement],
    problem: ProblemSpec,
    delta: int,
    h: float,
    degree: int = 16,
) -> ErrorReport:
    """The five monitored errors plus the auxiliary pressure and energy norms of the discrete error."""
    dofmap = solution.dofmap
    calc = NormCalculator(elements, dofmap)
    interp = interpolate_exact(elements, dofmap, problem.u, problem.p, degree)
    err = solution.coefficients - interp
    e_rec, e_grad_rec = reconstruction_errors(
        elements, dofmap, solution.coefficients, problem.u, problem.grad_u, degree
    )
    report = ErrorReport(
        e_1h=calc.norm_1h(err),
        e_grad_rec=e_grad_rec,
        e_L2=calc.velocity_l2(err),
        e_rec=e_rec,
        e_p=calc.pressure_l2(err),
        e_grad_p=calc.pressure_gradient(err, scaled=False),
        p_seminorm=calc.seminorm_0h(err),
        p_norm_Ph=calc.norm_Ph(err),
        energy=calc.norm_nuh(err, solution.nu, delta),
        h=h,
        size=solution.solved_size,
        full_size=dofmap.size,
    )
    logger.debug(
        f"Errors (h={h:.6f}): "
        + ", ".join(f"{name}={value:.6e}" for name, value in zip(ERROR_COLUMNS, report.errors(), strict=True))
    )
    return report


def cell_divergence_norms(
    elements: list[LocalElement], dofmap: DofMap, x: NDArray[np.float64]
) -> NDArray[np.float64]:
    """||div u_T||_{L2(T)} for every cell."""
    out = np.zeros(len(elements))
    for element in elements:
        spaces = element.spaces
        rule = spaces.rule
        coeffs = x[dofmap.ut(element.index)]
        div = coeffs @ spaces.ut.divergences(rule.points)
        out[element.index] = np.sqrt(float(rule.integrate(div * div)))
    return out


def exact_h1_norm(elements: list[LocalElement], u: Field, grad_u: Field, degree: int = 16) -> float:
    total = 0.0
    for element in elements:
        rule = element.spaces.cell.rule(degree)
        pts = element.to_global(rule.points)
        vals = u(pts)
        grads = grad_u(pts)
        total += float(np.einsum("qc,qc,q->", vals, vals, rule.weights))
        total += float(np.einsum("qcd,qcd,q->", grads, grads, rule.weights))
    return float(np.sqrt(total))


def forcing_l2_norm(elements: list[LocalElement], f: Field, degree: int = 16) -> float:
    total = 0.0
    for element in elements:
        rule = element.spaces.cell.rule(degree)
        vals = f(element.to_global(rule.points))
        total += float(np.einsum("qc,qc,q->", vals, vals, rule.weights))
    return float(np.sqrt(total))
