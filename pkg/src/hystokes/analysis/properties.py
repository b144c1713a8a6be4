"""
Property suites: numerical checks of the local operator identities, the form identities, the
interpolator properties and the global consequences (integration by parts, divergence-free
solutions) for every method.

Each check yields a ``SuiteEntry`` with a relative residual and a threshold. Random inputs are
polynomials with coefficients in [-1, 1] drawn from a generator seeded by the run seed and the
entry's configuration label, so results do not depend on which suites are selected.
"""

import zlib
from collections.abc import Callable, Iterator
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from ..core.forms import coupling_form, coupling_form_bis, rw_direct_form
from ..core.interpolators import (
    FaceProjector,
    L2Projector,
    MomentInterpolator,
    bdfm_interpolator,
    bdm_interpolator,
    rtn_interpolator,
)
from ..core.polynomials import monomial_exponents
from ..core.types import CellGeometry, ClosureCase, StabilizationKind
from ..mesh.generators import build_mesh
from ..mesh.mesh import POLYTOPAL, RECTANGULAR, SIMPLICIAL, Mesh
from ..scheme.assembly import assemble
from ..scheme.element import RIGID_MODES, LocalElement, build_elements
from ..scheme.methods import MethodConfig, MethodRegistry, make_config
from ..scheme.solver import solve
from ..utils.logger import get_logger
from .norms import cell_divergence_norms, exact_h1_norm
from .problems import Field, manufactured

logger = get_logger(__name__)

THRESHOLD = 1e-10
FIELD_DEGREE = 16
KERNEL_TOLERANCE = 1e-8
AVERAGE_FAILURE_LEVEL = 1e-6

SUITES = (
    "commutation",
    "ibp",
    "coupling",
    "global_ibp",
    "rw_identity",
    "stabilization",
    "forms",
    "reconstruction",
    "interpolators",
    "divergence_free",
    "diagnostics",
)

# Single generic cells, plus one coarse mesh per mesh class
SAMPLE_CELLS: dict[str, tuple[list[tuple[float, float]], list[list[int]]]] = {
    SIMPLICIAL: ([(0.1, 0.05), (0.85, 0.2), (0.35, 0.9)], [[0, 1, 2]]),
    RECTANGULAR: ([(0.1, 0.2), (0.8, 0.2), (0.8, 0.6), (0.1, 0.6)], [[0, 1, 2, 3]]),
    POLYTOPAL: ([(0.1, 0.1), (0.7, 0.05), (0.9, 0.5), (0.5, 0.85), (0.05, 0.6)], [[0, 1, 2, 3, 4]]),
}
SAMPLE_MESHES = {SIMPLICIAL: "tri:2", RECTANGULAR: "cart:2", POLYTOPAL: "hexa:2"}


@dataclass(frozen=True)
class SuiteEntry:
    suite: str
    identity: str
    config: str
    max_residual: float
    threshold: float = THRESHOLD
    expectation: str = "bound"  # "bound": residual <= threshold; "violation": residual > threshold; "report"

    @property
    def passed(self) -> bool:
        if self.expectation == "report":
            return bool(np.isfinite(self.max_residual))
        if self.expectation == "violation":
            return self.max_residual > self.threshold
        return self.max_residual <= self.threshold

    def to_dict(self) -> dict[str, Any]:
        return {**asdict(self), "passed": self.passed}


@dataclass
class PropertyReport:
    seed: int
    entries: list[SuiteEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    def failures(self) -> list[SuiteEntry]:
        return [entry for entry in self.entries if not entry.passed]

    def to_frame(self) -> pd.DataFrame:
        columns = ["suite", "identity", "config", "max_residual", "threshold", "expectation", "passed"]
        return pd.DataFrame([entry.to_dict() for entry in self.entries], columns=columns)

    def summary(self) -> str:
        n_failed = len(self.failures())
        return f"{len(self.entries) - n_failed}/{len(self.entries)} checks passed (seed {self.seed})"


# Random polynomial fields in global coordinates


class RandomPolynomial:
    """Random polynomial field of a given degree, optionally times the unit-square bubble."""

    def __init__(self, rng: np.random.Generator, degree: int, ncomp: int = 2, bubble: bool = False):
        self.exponents = monomial_exponents(degree)
        self.coeffs = rng.uniform(-1.0, 1.0, (ncomp, len(self.exponents)))
        self.ncomp = ncomp
        self.bubble = bubble

    def _raw(self, points: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        x, y = points[:, :1], points[:, 1:]
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        mono = x**a * y**b
        dx = a * x ** np.maximum(a - 1, 0) * y**b
        dy = b * x**a * y ** np.maximum(b - 1, 0)
        values = mono @ self.coeffs.T
        grads = np.stack([dx @ self.coeffs.T, dy @ self.coeffs.T], axis=-1)
        if self.bubble:
            bx, by = x * (1 - x), y * (1 - y)
            bub = bx * by
            dbub = np.concatenate([(1 - 2 * x) * by, bx * (1 - 2 * y)], axis=1)
            grads = grads * bub[:, :, None] + values[:, :, None] * dbub[:, None, :]
            values = values * bub
        return values, grads

    def __call__(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        values = self._raw(points)[0]
        return values[:, 0] if self.ncomp == 1 else values

    def gradient(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        grads = self._raw(points)[1]
        return grads[:, 0, :] if self.ncomp == 1 else grads

    def divergence(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        grads = self._raw(points)[1]
        return grads[:, 0, 0] + grads[:, 1, 1]


def _local(field_: Field, frame: LocalElement | CellGeometry) -> Field:
    def local(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return field_(frame.to_global(points))

    return local


def velocity_interpolate(element: LocalElement, v: Field, degree: int = FIELD_DEGREE) -> NDArray[np.float64]:
    """Local hybrid interpolate (I_{U,T} v, (pi_{U_F} v)_F), boundary faces included."""
    spaces = element.spaces
    layout = spaces.layout
    local = _local(v, element)
    out = np.zeros(layout.n_velocity)
    out[layout.ut_slice] = spaces.iut.apply(local, degree)
    for f, fb in enumerate(spaces.uf_bases):
        out[layout.uf_slice(f)] = FaceProjector(spaces.cell, f, fb).apply(local, degree)
    return out


def pressure_interpolate(element: LocalElement, q: Field, degree: int = FIELD_DEGREE) -> NDArray[np.float64]:
    spaces = element.spaces
    layout = spaces.layout
    local = _local(q, element)
    out = np.zeros(layout.n_pressure)
    out[layout.pt_slice] = L2Projector(spaces.cell, spaces.pt).apply(local, degree)
    for f, fb in enumerate(spaces.pf_bases):
        out[layout.pf_slice(f)] = FaceProjector(spaces.cell, f, fb).apply(local, degree)
    return out


def _relative(diff: NDArray[np.float64] | float, reference: NDArray[np.float64] | float) -> float:
    scale = float(np.linalg.norm(reference))
    return float(np.linalg.norm(diff)) / max(scale, 1e-300)


def _matrix_field(gradient: Field, element: LocalElement) -> Field:
    def local(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return gradient(element.to_global(points)).reshape(len(points), 4)

    return local


def _seeded(seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(label.encode("utf-8"))])


# Contexts


@dataclass
class SuiteContext:
    """One method configuration on one mesh, with its elements."""

    config: MethodConfig
    mesh: Mesh
    seed: int

    @cached_property
    def elements(self) -> list[LocalElement]:
        return build_elements(self.mesh, self.config, 1.0)

    @cached_property
    def representatives(self) -> list[LocalElement]:
        """One element per distinct local kernel."""
        seen: dict[int, LocalElement] = {}
        for element in self.elements:
            seen.setdefault(id(element.kernel), element)
        return list(seen.values())

    @property
    def label(self) -> str:
        return f"{self.config.label()} on {self.mesh.name}"

    def rng(self, suite: str) -> np.random.Generator:
        return _seeded(self.seed, f"{suite}|{self.label}")

    def entry(self, suite: str, identity: str, residual: float, **kwargs: Any) -> SuiteEntry:
        return SuiteEntry(suite, identity, self.label, float(residual), **kwargs)


# Local operator suites


def commutation_suite(ctx: SuiteContext) -> Iterator[SuiteEntry]:
    """D_T I_U v = pi_P div v, G_T I_P q = pi_U grad q, E_T I_U v = pi_Sigma grad v."""
    rng = ctx.rng("commutation")
    k = ctx.config.k
    claims = ctx.config.claims
    worst = {"DT": 0.0, "GT": 0.0, "ET": 0.0}
    for element in ctx.representatives:
        spaces = element.spaces
        ops = element.ops
        v = RandomPolynomial(rng, k + 2)
        q = RandomPolynomial(rng, k + 1, ncomp=1)
        iv = velocity_interpolate(element, v)
        if "DT" in claims:
            reference = L2Projector(spaces.cell, spaces.pt).apply(_local(v.divergence, element), FIELD_DEGREE)
            worst["DT"] = max(worst["DT"], _relative(ops.div @ iv - reference, reference))
        if "GT" in claims:
            iq = pressure_interpolate(element, q)
            reference = L2Projector(spaces.cell, spaces.ut).apply(_local(q.gradient, element), FIELD_DEGREE)
            worst["GT"] = max(worst["GT"], _relative(ops.pgrad @ iq - reference, reference))
        if "ET" in claims:
            reference = L2Projector(spaces.cell, spaces.sigma).apply(_matrix_field(v.gradient, element), FIELD_DEGREE)
            worst["ET"] = max(worst["ET"], _relative(ops.vgrad @ iv - reference, reference))
    names = {
        "DT": "D_T I_U v = pi_P div v",
        "GT": "G_T I_P q = pi_U grad q",
        "ET": "E_T I_U v = pi_Sigma grad v",
    }
    for key, identity in names.items():
        if key in claims:
            yield ctx.entry("commutation", identity, worst[key])


def ibp_suite(ctx: SuiteContext) -> Iterator[SuiteEntry]:
    """
    int G_T q . v_T = -int D_T v q_T + sum_F int_F (v_T - v_F) . n_TF (q_F - q_T) + sum_F int_F (v_F . n_TF) q_F
    for random hybrid pairs.
    """
    rng = ctx.rng("ibp")
    worst = 0.0
    for element in ctx.representatives:
        spaces = element.spaces
        ops = element.ops
        layout = spaces.layout
        v = rng.uniform(-1.0, 1.0, layout.n_velocity)
        q = rng.uniform(-1.0, 1.0, layout.n_pressure)
        lhs = float((ops.pgrad @ q) @ spaces.mass(spaces.ut) @ v[layout.ut_slice])
        volume = -float((ops.div @ v) @ spaces.mass(spaces.pt) @ q[layout.pt_slice])
        boundary = 0.0
        flux = 0.0
        for f, face in enumerate(spaces.cell.faces):
            fr = spaces.face_rule(f)
            jump_n = -np.einsum("i,iqc,c->q", v, spaces.velocity_jump(f, fr.points), face.outward_normal)
            boundary += float(np.einsum("i,iq,q,q->", q, spaces.pressure_jump(f, fr.points), jump_n, fr.weights))
            flux_n = v[layout.uf_slice(f)] @ (spaces.uf_bases[f].values(fr.points) @ face.outward_normal)
            q_f = q[layout.pf_slice(f)] @ spaces.pf_bases[f].scalar_values(fr.points)
            flux += float(np.sum(q_f * flux_n * fr.weights))
        scale = abs(lhs) + abs(volume) + abs(boundary) + abs(flux)
        worst = max(worst, abs(lhs - volume - boundary - flux) / max(scale, 1e-300))
    yield ctx.entry("ibp", "discrete integration by parts link between G_T and D_T", worst)


def coupling_suite(ctx: SuiteContext) -> Iterator[SuiteEntry]:
    worst = 0.0
    for element in ctx.representatives:
        first = coupling_form(element.spaces, element.ops)
        second = coupling_form_bis(element.spaces, element.ops)
        worst = max(worst, float(np.abs(first - second).max() / max(np.abs(first).max(), 1e-300)))
    yield ctx.entry("coupling", "b_T from G_T equals b_T from D_T and face jumps", worst)


def rw_identity_suite(ctx: SuiteContext) -> Iterator[SuiteEntry]:
    stabilization = ctx.config.stabilization
    if stabilization.kind is not StabilizationKind.RHEBERGEN_WELLS:
        return
    assert stabilization.eta is not None
    worst = 0.0
    for element in ctx.representatives:
        direct = rw_direct_form(element.spaces, stabilization.eta)
        a = element.forms.a
        worst = max(worst, float(np.abs(a - direct).max() / max(np.abs(direct).max(), 1e-300)))
    yield ctx.entry("rw_identity", "E_T Gram plus rewritten s_T equals the interior-penalty form", worst)


def stabilization_suite(ctx: SuiteContext) -> Iterator[SuiteEntry]:
    """Polynomial consistency of s_T (and of delta_T, delta_TF for the HHO stabilizations)."""
    rng = ctx.rng("stabilization")
    k = ctx.config.k
    rw = ctx.config.stabilization.kind is StabilizationKind.RHEBERGEN_WELLS
    worst_s = 0.0
    worst_delta = 0.0
    for element in ctx.representatives:
        w = RandomPolynomial(rng, k if rw else k + 1)
        iw = velocity_interpolate(element, w)
        s = element.forms.s
        s_norm = max(float(np.linalg.norm(s, 2)), 1e-300)
        if rw:
            worst_s = max(worst_s, abs(float(iw @ s @ iw)) / (s_norm * float(iw @ iw)))
        else:
            worst_s = max(worst_s, float(np.linalg.norm(s @ iw)) / (s_norm * float(np.linalg.norm(iw))))
            diff = element.ops.diff
            deltas = [diff.cell @ iw] + [face @ iw for face in diff.faces]
            worst_delta = max(worst_delta, float(np.linalg.norm(np.concatenate(deltas))) / float(np.linalg.norm(iw)))
    if rw:
        yield ctx.entry("stabilization", "s_T(I w, I w) = 0 for w in P^k", worst_s)
    else:
        yield ctx.entry("stabilization", "s_T(I w, .) = 0 for w in P^(k+1)", worst_s)
        yield ctx.entry("stabilization", "delta_T I w = 0 and delta_TF I w = 0 for w in P^(k+1)", worst_delta)


def forms_suite(ctx: SuiteContext) -> Iterator[SuiteEntry]:
    """a_T symmetric positive semi-definite with the constants as kernel; d_T positive semi-definite."""
    worst_negative = 0.0
    worst_kernel = 0.0
    worst_d = 0.0
    for element in ctx.representatives:
        a = element.forms.a
        eigenvalues = np.linalg.eigvalsh(a)
        scale = max(float(np.abs(eigenvalues).max()), 1e-300)
        worst_negative = max(worst_negative, max(-float(eigenvalues.min()), 0.0) / scale)
        kernel = int(np.sum(eigenvalues <= KERNEL_TOLERANCE * scale))
        worst_kernel = max(worst_kernel, abs(kernel - RIGID_MODES))
        d = element.forms.d
        if np.any(d):
            d_eigen = np.linalg.eigvalsh(d)
            worst_d = max(worst_d, max(-float(d_eigen.min()), 0.0) / float(np.abs(d_eigen).max()))
    yield ctx.entry("forms", "a_T positive semi-definite", worst_negative, threshold=1e-11)
    yield ctx.entry("forms", "kernel of a_T is the constants", worst_kernel, threshold=0.5)
    if ctx.config.delta:
        yield ctx.entry("forms", "d_T positive semi-definite", worst_d, threshold=1e-11)


def reconstruction_suite(ctx: SuiteContext) -> Iterator[SuiteEntry]:
    """r_T I v = v on W_T (RW: on affine fields); average preservation of the face-average closure."""
    rng = ctx.rng("reconstruction")
    k = ctx.config.k
    rw = ctx.config.stabilization.kind is StabilizationKind.RHEBERGEN_WELLS
    worst_full = 0.0
    worst_affine = 0.0
    worst_mean = 0.0
    for element in ctx.representatives:
        spaces = element.spaces
        recon = element.ops.recon
        projector = L2Projector(spaces.cell, spaces.w)
        if not rw:
            v = RandomPolynomial(rng, k + 1)
            reference = projector.apply(_local(v, element), FIELD_DEGREE)
            worst_full = max(worst_full, _relative(recon @ velocity_interpolate(element, v) - reference, reference))
        affine = RandomPolynomial(rng, 1)
        reference = projector.apply(_local(affine, element), FIELD_DEGREE)
        r = recon @ velocity_interpolate(element, affine)
        worst_affine = max(worst_affine, _relative(r - reference, reference))
        rule = spaces.cell.rule(spaces.w.degree)
        mean_r = np.einsum("i,iqc,q->c", r, spaces.w.values(rule.points), rule.weights)
        mean_v = np.einsum("qc,q->c", _local(affine, element)(rule.points), rule.weights)
        worst_mean = max(worst_mean, _relative(mean_r - mean_v, mean_v))
    if not rw:
        yield ctx.entry("reconstruction", "r_T I v = v for v in P^(k+1)", worst_full)
    yield ctx.entry("reconstruction", "r_T reproduces affine fields", worst_affine)
    if ctx.config.closure is ClosureCase.FACE_AVERAGE:
        yield ctx.entry("reconstruction", "face-average closure preserves averages of affine fields", worst_mean)


# Global suites


def global_ibp_suite(ctx: SuiteContext) -> Iterator[SuiteEntry]:
    """
    E_ibp(v, q) = sum_T sum_F int_F (I_{U,T} v - I_{U,F} v) . n_TF (q_F - q_T) for v vanishing on the
    boundary and a random hybrid pressure.
    """
    rng = ctx.rng("global_ibp")
    v = RandomPolynomial(rng, ctx.config.k + 2, bubble=True)
    elements = ctx.elements
    n_pf = elements[0].spaces.layout.n_pf
    n_pt = elements[0].spaces.layout.n_pt
    q_faces = rng.uniform(-1.0, 1.0, (ctx.mesh.n_faces, n_pf))
    q_cells = rng.uniform(-1.0, 1.0, (ctx.mesh.n_cells, n_pt))
    total = 0.0
    scale = 0.0
    flux_total = 0.0
    flux_scale = 0.0
    for element in elements:
        spaces = element.spaces
        layout = spaces.layout
        iv = velocity_interpolate(element, v)
        q = np.concatenate([q_cells[element.index]] + [q_faces[f] for f in element.faces])
        for f, face in enumerate(spaces.cell.faces):
            fr = spaces.face_rule(f)
            cell_trace = np.einsum("i,iqc->qc", iv[layout.ut_slice], spaces.ut.values(fr.points)) @ face.outward_normal
            face_value = np.einsum("i,iqc->qc", iv[layout.uf_slice(f)], spaces.uf_bases[f].values(fr.points))
            face_trace = face_value @ face.outward_normal
            pressure_gap = q @ spaces.pressure_jump(f, fr.points)
            total += float(np.sum((cell_trace - face_trace) * pressure_gap * fr.weights))
            scale += float(np.sqrt(np.sum(cell_trace**2 * fr.weights) * np.sum(pressure_gap**2 * fr.weights)))

            q_face = q[layout.pf_slice(f)] @ spaces.pf_bases[f].scalar_values(fr.points)
            contribution = float(np.sum(face_trace * q_face * fr.weights))
            flux_total += contribution
            flux_scale += abs(contribution)

    yield ctx.entry(
        "global_ibp",
        "sum_T sum_F int_F (v_F . n_TF) q_F = 0 for v_h in U_h0",
        abs(flux_total) / max(flux_scale, 1e-300),
    )
    value = abs(total) / max(scale, 1e-300)
    if ctx.config.delta == 0:
        yield ctx.entry("global_ibp", "E_ibp(v, q) = 0", value)
    else:
        yield ctx.entry("global_ibp", "E_ibp(v, q) for a random pair", value, expectation="report")
        active = float(np.abs(ctx.representatives[0].forms.d).max())
        yield ctx.entry(
            "global_ibp", "pressure jump stabilization active", active, threshold=0.0, expectation="violation"
        )


def divergence_free_suite(ctx: SuiteContext) -> Iterator[SuiteEntry]:
    """Solved velocities of the pressure-robust methods are divergence free cell by cell."""
    if ctx.config.delta:
        return
    problem = manufactured(1.0)
    system = assemble(ctx.mesh, ctx.config, problem.nu, problem.f, elements=ctx.elements)
    solution = solve(system)
    norms = cell_divergence_norms(ctx.elements, system.dofmap, solution.coefficients)
    scale = exact_h1_norm(ctx.elements, problem.u, problem.grad_u)
    yield ctx.entry("divergence_free", "max_T ||div u_T|| <= 1e-10 ||u||_H1", float(norms.max()) / scale)


def diagnostics_suite(ctx: SuiteContext) -> Iterator[SuiteEntry]:
    """Velocity error-bound pieces for the manufactured solution (reported, not asserted)."""
    problem = manufactured(1.0)
    stab = 0.0
    flux = 0.0
    for element in ctx.elements:
        spaces = element.spaces
        iu = velocity_interpolate(element, problem.u)
        stab += float(iu @ element.forms.s @ iu)
        projected = L2Projector(spaces.cell, spaces.sigma).apply(_matrix_field(problem.grad_u, element), FIELD_DEGREE)
        for f in range(spaces.cell.n_faces):
            fr = spaces.cell.face_rule(f, FIELD_DEGREE)
            exact = problem.grad_u(element.to_global(fr.points)).reshape(len(fr.points), 4)
            approx = np.einsum("i,iqc->qc", projected, spaces.sigma.values(fr.points))
            flux += spaces.cell.diameter * float(np.einsum("qc,qc,q->", exact - approx, exact - approx, fr.weights))
    yield ctx.entry("diagnostics", "sum_T s_T(I u, I u)", stab, threshold=np.inf, expectation="report")
    yield ctx.entry(
        "diagnostics", "sum_T h_T ||grad u - pi_Sigma grad u||^2 on faces", flux, threshold=np.inf, expectation="report"
    )


LOCAL_SUITES: dict[str, Callable[[SuiteContext], Iterator[SuiteEntry]]] = {
    "commutation": commutation_suite,
    "ibp": ibp_suite,
    "coupling": coupling_suite,
    "rw_identity": rw_identity_suite,
    "stabilization": stabilization_suite,
    "forms": forms_suite,
    "reconstruction": reconstruction_suite,
}
GLOBAL_SUITES: dict[str, Callable[[SuiteContext], Iterator[SuiteEntry]]] = {
    "global_ibp": global_ibp_suite,
    "divergence_free": divergence_free_suite,
    "diagnostics": diagnostics_suite,
}


# Interpolator suite (method independent)


def _interpolator_entries(
    interp: MomentInterpolator, family: str, degree: int, cell: CellGeometry, label: str, rng: np.random.Generator
) -> Iterator[SuiteEntry]:
    idem = interp.matrix_for(interp.target) - np.eye(interp.target.dim)
    yield SuiteEntry("interpolators", "I o I = I on the target space", label, float(np.abs(idem).max()))

    v = RandomPolynomial(rng, degree + 1)
    local_v = _local(v, cell)
    coeffs = interp.apply(local_v, FIELD_DEGREE)

    def image(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.einsum("i,iqc->qc", coeffs, interp.target.values(points))

    moments_v = interp.moments(local_v, FIELD_DEGREE)
    moments_i = interp.moments(image, interp.target.degree)
    residual = _relative(moments_i - moments_v, moments_v)
    yield SuiteEntry("interpolators", "moments of I v equal moments of v", label, residual)

    if degree != 1:
        return
    affine = _local(RandomPolynomial(rng, 1), cell)
    affine_coeffs = interp.apply(affine, 1)
    rule = cell.rule(FIELD_DEGREE)
    mean_v = np.einsum("qc,q->c", affine(rule.points), rule.weights)
    mean_i = np.einsum("i,iqc,q->c", affine_coeffs, interp.target.values(rule.points), rule.weights)
    defect = _relative(mean_i - mean_v, mean_v)
    if family == "BDM":
        yield SuiteEntry("interpolators", "I_BDM^1 preserves cell averages", label, defect)
    elif family == "RTN":
        yield SuiteEntry(
            "interpolators",
            "I_RTN^1 does not preserve cell averages",
            label,
            defect,
            threshold=AVERAGE_FAILURE_LEVEL,
            expectation="violation",
        )
    else:
        yield SuiteEntry("interpolators", "I_BDFM^1 cell-average defect", label, defect, expectation="report")


def interpolator_suite(
    cell: CellGeometry, tag: str, seed: int, degrees: tuple[int, ...] = (1, 2, 3)
) -> list[SuiteEntry]:
    """Idempotence, moment preservation and average preservation of the moment interpolators."""
    families: list[tuple[str, Callable[[CellGeometry, int], MomentInterpolator]]] = []
    if tag == SIMPLICIAL:
        families = [("BDM", bdm_interpolator), ("RTN", rtn_interpolator)]
    elif tag == RECTANGULAR:
        families = [("BDFM", bdfm_interpolator)]
    entries: list[SuiteEntry] = []
    for family, builder in families:
        for degree in degrees:
            interp = builder(cell, degree)
            label = f"{interp.name} on sample {tag} cell"
            rng = _seeded(seed, f"interpolators|{label}")
            entries.extend(_interpolator_entries(interp, family, degree, cell, label, rng))
    return entries


# Driver


def sample_cell_mesh(tag: str) -> Mesh:
    vertices, cells = SAMPLE_CELLS[tag]
    return Mesh.from_cells(vertices, cells, name=f"sample-{tag}")


def sample_meshes(tag: str) -> list[Mesh]:
    return [sample_cell_mesh(tag), build_mesh(SAMPLE_MESHES[tag])]


def degree_range(config_min_k: int, max_k: int = 2) -> list[int]:
    return list(range(config_min_k, max_k + 1))


def property_suites(
    methods: list[str] | None = None,
    seed: int = 42,
    suites: list[str] | None = None,
    ks: list[int] | None = None,
    registry: MethodRegistry | None = None,
    overrides: dict[str, Any] | None = None,
) -> PropertyReport:
    """
    Run the selected suites (default: all) for every method and degree.

    Local suites run on a generic sample cell and on a coarse mesh of the method's mesh class;
    global suites run on the coarse mesh.
    """
    registry = registry or MethodRegistry()
    methods = [registry.resolve(m) for m in (methods or registry.names())]
    selected = list(suites or SUITES)
    unknown = set(selected) - set(SUITES)
    if unknown:
        error_msg = f"unknown suites {sorted(unknown)} (expected some of {', '.join(SUITES)})"
        raise ValueError(error_msg)

    report = PropertyReport(seed)
    for name in methods:
        spec = registry.get_spec(name)
        for k in ks if ks is not None else degree_range(spec.min_k):
            if k < spec.min_k:
                continue
            meshes = sample_meshes(spec.mesh)
            for mesh in meshes:
                config = make_config(name, k, overrides, registry=registry, mesh=mesh)
                ctx = SuiteContext(config, mesh, seed)
                for suite in selected:
                    runner = LOCAL_SUITES.get(suite)
                    if runner is None and mesh is not meshes[0]:
                        runner = GLOBAL_SUITES.get(suite)
                    if runner is not None:
                        report.entries.extend(runner(ctx))
            logger.debug(f"Suites done for {name} k={k}")

    if "interpolators" in selected:
        for tag in (SIMPLICIAL, RECTANGULAR):
            mesh = sample_cell_mesh(tag)
            report.entries.extend(interpolator_suite(CellGeometry.from_mesh(mesh, 0), tag, seed))

    for entry in report.failures():
        logger.warning(f"[{entry.suite}] {entry.identity} ({entry.config}): residual {entry.max_residual:.3e}")
    logger.info(f"Property suites: {report.summary()}")
    return report
