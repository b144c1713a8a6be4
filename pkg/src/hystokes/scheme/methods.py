"""
Method registry: the five space/interpolator/stabilization instantiations of the hybrid scheme.

The rows are the built-in ``DEFAULT_METHODS`` below; ``config/methods.yaml`` may override their fields.
Degrees are stored as shifts relative to the scheme degree k (e.g. ``ut_shift: 1`` gives
U_T of degree k + 1).
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from ..core.forms import Stabilization
from ..core.interpolators import (
    EmbeddedInterpolator,
    Interpolator,
    L2Projector,
    bdfm_interpolator,
    bdm_interpolator,
    rtn_interpolator,
)
from ..core.localops import LocalSpaces
from ..core.polynomials import PolyBasis, matrix_basis, scalar_basis, vector_basis
from ..core.spaces import bdfm_basis, gradient_space, rtn_basis
from ..core.types import CellGeometry, ClosureCase, SigmaChoice, StabilizationKind
from ..mesh.mesh import POLYTOPAL, RECTANGULAR, SIMPLICIAL, Mesh
from ..utils.logger import get_logger

logger = get_logger(__name__)

INCLUSION_TOLERANCE = 1e-10

ASSUMPTIONS = ("DT", "GT", "global_ibp", "ET", "sT")

METHOD_ALIASES = {
    "botti-massa": "botti_massa",
    "bm": "botti_massa",
    "rhebergen-wells": "rhebergen_wells",
    "rw": "rhebergen_wells",
    "rtn": "rtn_new",
    "rtn-new": "rtn_new",
    "bdfm": "bdfm_new",
    "bdfm-new": "bdfm_new",
}

DEFAULT_METHODS: dict[str, dict[str, Any]] = {
    "botti_massa": {
        "description": "BDM^{k+1} element velocities, P^{k+1}(F) face pressures",
        "mesh": SIMPLICIAL,
        "ut_space": "polynomial",
        "ut_shift": 1,
        "interpolator": "bdm",
        "pt_shift": 0,
        "pf_shift": 1,
        "sigma_shift": 0,
        "stabilization": "hho_classical",
        "delta": 0,
        "min_k": 0,
        "assumptions": ["DT", "GT", "global_ibp", "ET", "sT"],
    },
    "rhebergen_wells": {
        "description": "BDM^k element velocities with the interior-penalty viscous form",
        "mesh": SIMPLICIAL,
        "ut_space": "polynomial",
        "ut_shift": 0,
        "interpolator": "bdm",
        "pt_shift": -1,
        "pf_shift": 0,
        "sigma_shift": -1,
        "stabilization": "rhebergen_wells",
        "delta": 0,
        "min_k": 1,
        "assumptions": ["DT", "GT", "global_ibp", "ET", "sT"],
    },
    "rtn_new": {
        "description": "RTN^{k+1} element velocities on simplices",
        "mesh": SIMPLICIAL,
        "ut_space": "rtn",
        "ut_shift": 1,
        "interpolator": "rtn",
        "pt_shift": 0,
        "pf_shift": 0,
        "sigma_shift": 0,
        "stabilization": "hho_classical",
        "delta": 0,
        "min_k": 0,
        "assumptions": ["DT", "GT", "global_ibp", "ET", "sT"],
    },
    "bdfm_new": {
        "description": "BDFM^{k+1} element velocities on rectangles",
        "mesh": RECTANGULAR,
        "ut_space": "bdfm",
        "ut_shift": 1,
        "interpolator": "bdfm",
        "pt_shift": 0,
        "pf_shift": 0,
        "sigma_shift": 0,
        "stabilization": "hho_classical",
        "delta": 0,
        "min_k": 0,
        "assumptions": ["DT", "GT", "global_ibp", "ET", "sT"],
    },
    "polytopal": {
        "description": "P^{k+1} element velocities with L2 projection and pressure jump stabilization",
        "mesh": POLYTOPAL,
        "ut_space": "polynomial",
        "ut_shift": 1,
        "interpolator": "l2",
        "pt_shift": 0,
        "pf_shift": 0,
        "sigma_shift": 0,
        "stabilization": "hho_classical",
        "delta": 1,
        "min_k": 0,
        "assumptions": ["DT", "GT", "ET", "sT"],
    },
}


class MethodConfigurationError(ValueError):
    """Raised for unknown methods, degrees out of range or invalid overrides."""

    def __init__(self, reason: str):
        super().__init__(f"Invalid method configuration: {reason}")


class MeshCompatibilityError(ValueError):
    """Raised when a method is used on a mesh it is not defined for."""

    def __init__(self, method: str, required: str, actual: str):
        super().__init__(f"Method '{method}' needs a {required} mesh, got a {actual} mesh")


class SelfCheckError(RuntimeError):
    """Raised when a claimed space inclusion fails numerically on a sample cell."""

    def __init__(self, method: str, check: str, residual: float):
        super().__init__(f"Self-check '{check}' failed for method '{method}' (residual {residual:.3e})")


@dataclass(frozen=True)
class MethodSpec:
    name: str
    mesh: str
    ut_space: str
    ut_shift: int
    interpolator: str
    pt_shift: int
    pf_shift: int
    sigma_shift: int
    stabilization: str
    delta: int
    min_k: int
    assumptions: tuple[str, ...] = ()
    uf_shift: int = 0
    description: str = ""


@dataclass(frozen=True)
class MethodConfig:
    """A method row instantiated at degree k, plus the run-level discretization options."""

    spec: MethodSpec
    k: int
    stabilization: Stabilization
    sigma_choice: SigmaChoice = SigmaChoice.MATRIX
    quad_bump: int = 0
    claims: frozenset[str] = field(default_factory=frozenset)

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def delta(self) -> int:
        return self.spec.delta

    @property
    def boxed(self) -> bool:
        return self.stabilization.kind is StabilizationKind.HHO_BOXED

    @property
    def ut_degree(self) -> int:
        return self.k + self.spec.ut_shift

    @property
    def uf_degree(self) -> int:
        return self.k + self.spec.uf_shift

    @property
    def pt_degree(self) -> int:
        return self.k + self.spec.pt_shift

    @property
    def pf_degree(self) -> int:
        return self.k + self.spec.pf_shift

    @property
    def sigma_degree(self) -> int:
        return self.k + self.spec.sigma_shift

    @property
    def w_degree(self) -> int:
        return self.k + 1

    @property
    def quad_degree(self) -> int:
        return 2 * (self.k + 2) + self.quad_bump

    @property
    def closure(self) -> ClosureCase:
        """Face-average closure for RTN/BDFM interpolators at k = 0, cell average otherwise."""
        if self.spec.interpolator in ("rtn", "bdfm") and self.k == 0:
            return ClosureCase.FACE_AVERAGE
        return ClosureCase.CELL_AVERAGE

    def label(self) -> str:
        suffix = "+boxed" if self.boxed else ""
        return f"{self.name}{suffix} k={self.k}"

    def check_mesh(self, mesh: Mesh) -> None:
        required = self.spec.mesh
        if required != POLYTOPAL and mesh.tag != required:
            raise MeshCompatibilityError(self.name, required, mesh.tag)

    # Local spaces

    def _element_velocity(self, cell: CellGeometry) -> tuple[PolyBasis, Interpolator]:
        degree = self.ut_degree
        kind = self.spec.ut_space
        if self.boxed or kind == "polynomial":
            ut = vector_basis(cell, degree)
        elif kind == "rtn":
            ut = rtn_basis(cell, degree, orthonormal=True)
        elif kind == "bdfm":
            ut = bdfm_basis(cell, degree, orthonormal=True)
        else:
            raise MethodConfigurationError(f"unknown element velocity space '{kind}'")

        interp = self.spec.interpolator
        if interp == "l2":
            return ut, L2Projector(cell, ut)
        if interp == "bdm":
            return ut, bdm_interpolator(cell, degree, target=ut)
        if interp == "rtn":
            if self.boxed:
                return ut, EmbeddedInterpolator(cell, rtn_interpolator(cell, degree), ut)
            return ut, rtn_interpolator(cell, degree, target=ut)
        if interp == "bdfm":
            if self.boxed:
                return ut, EmbeddedInterpolator(cell, bdfm_interpolator(cell, degree), ut)
            return ut, bdfm_interpolator(cell, degree, target=ut)
        raise MethodConfigurationError(f"unknown interpolator '{interp}'")

    def sigma_basis(self, cell: CellGeometry) -> PolyBasis:
        if self.sigma_choice is SigmaChoice.GRADIENT:
            return gradient_space(cell, self.sigma_degree)
        return matrix_basis(cell, self.sigma_degree)

    def local_spaces(self, cell: CellGeometry) -> LocalSpaces:
        ut, iut = self._element_velocity(cell)
        return LocalSpaces(
            cell=cell,
            k=self.k,
            ut=ut,
            uf_degree=self.uf_degree,
            pt=scalar_basis(cell, self.pt_degree),
            pf_degree=self.pf_degree,
            sigma=self.sigma_basis(cell),
            w=vector_basis(cell, self.w_degree),
            iut=iut,
            closure=self.closure,
            quad_degree=self.quad_degree,
        )


class MethodRegistry:
    """
    Registry of method rows.
    Built-in rows, with the fields given in ``methods.yaml`` (if any) merged over them key by key.
    """

    def __init__(self, config_path: Path | None = None):
        self.config_path = config_path
        self._specs: dict[str, MethodSpec] = {}
        self._load_config()

    def _load_config(self) -> None:
        loaded_data: dict[str, Any] = {}
        if self.config_path and self.config_path.exists():
            try:
                with open(self.config_path, encoding="utf-8") as f:
                    loaded_data = yaml.safe_load(f) or {}
            except Exception:
                logger.exception("Failed to load method registry")

        ignored = sorted(set(loaded_data) - set(DEFAULT_METHODS))
        if ignored:
            logger.warning(f"Ignoring rows for unknown methods in {self.config_path}: {', '.join(ignored)}")

        for key, default in DEFAULT_METHODS.items():
            data = {**default, **loaded_data.get(key, {})}
            data["assumptions"] = tuple(data.get("assumptions", ()))
            unknown = set(data["assumptions"]) - set(ASSUMPTIONS)
            if unknown:
                raise MethodConfigurationError(f"method '{key}' claims unknown assumptions {sorted(unknown)}")
            self._specs[key] = MethodSpec(name=key, **data)
        logger.debug(f"Method registry ready: {', '.join(self._specs)}")

    def names(self) -> list[str]:
        return list(self._specs)

    def resolve(self, name: str) -> str:
        key = METHOD_ALIASES.get(name, name).replace("-", "_")
        if key not in self._specs:
            raise MethodConfigurationError(f"unknown method '{name}' (expected one of {', '.join(self._specs)})")
        return key

    def get_spec(self, name: str) -> MethodSpec:
        return self._specs[self.resolve(name)]


def default_eta(k: int) -> float:
    return 6.0 * (k + 1) ** 2


def make_config(
    name: str,
    k: int,
    overrides: dict[str, Any] | None = None,
    registry: MethodRegistry | None = None,
    mesh: Mesh | None = None,
) -> MethodConfig:
    """
    Instantiate a method at degree k.

    Recognized overrides: ``eta`` (RW penalty), ``sigma`` ("matrix" | "gradient"), ``quad_bump``
    and ``stabilization`` ("hho_boxed" on rtn_new / bdfm_new). When ``mesh`` is given, the mesh
    compatibility and the claimed inclusions are checked on its first cell.
    """
    overrides = dict(overrides or {})
    registry = registry or MethodRegistry()
    spec = registry.get_spec(name)

    if k < spec.min_k:
        raise MethodConfigurationError(f"method '{spec.name}' needs k >= {spec.min_k}, got k={k}")

    try:
        kind = StabilizationKind(overrides.pop("stabilization", None) or spec.stabilization)
    except ValueError as e:
        raise MethodConfigurationError(str(e)) from e
    if kind is StabilizationKind.HHO_BOXED:
        if spec.interpolator not in ("rtn", "bdfm"):
            raise MethodConfigurationError(f"hho_boxed is only defined for rtn_new and bdfm_new, not '{spec.name}'")
        spec = replace(spec, ut_space="polynomial")
    elif kind is not StabilizationKind(spec.stabilization):
        raise MethodConfigurationError(f"method '{spec.name}' does not support stabilization '{kind.value}'")

    eta = overrides.pop("eta", None)
    if kind is StabilizationKind.RHEBERGEN_WELLS:
        eta = default_eta(k) if eta is None else float(eta)
        if eta <= 0:
            raise MethodConfigurationError(f"eta must be positive, got {eta}")
    else:
        eta = None

    try:
        sigma = SigmaChoice(overrides.pop("sigma", None) or SigmaChoice.MATRIX.value)
    except ValueError as e:
        raise MethodConfigurationError(str(e)) from e
    quad_bump = int(overrides.pop("quad_bump", 0) or 0)
    if quad_bump < 0:
        raise MethodConfigurationError(f"quad_bump must be non-negative, got {quad_bump}")
    if overrides:
        raise MethodConfigurationError(f"unknown overrides {sorted(overrides)}")

    config = MethodConfig(
        spec=spec,
        k=k,
        stabilization=Stabilization(kind, eta),
        sigma_choice=sigma,
        quad_bump=quad_bump,
        claims=frozenset(spec.assumptions),
    )
    if mesh is not None:
        config.check_mesh(mesh)
        self_check(config, CellGeometry.from_mesh(mesh, 0))
    logger.debug(f"Configured {config.label()} (delta={config.delta}, eta={eta}, sigma={sigma.value})")
    return config


def _projection_residual(spaces: LocalSpaces, family: PolyBasis, into: PolyBasis) -> float:
    """Relative L2 distance of the members of ``family`` from span(``into``)."""
    if family.dim == 0:
        return 0.0
    rule = spaces.cell.rule(2 * max(family.degree, into.degree))
    fvals = family.values(rule.points)
    ivals = into.values(rule.points)
    gram = np.einsum("iqc,jqc,q->ij", ivals, ivals, rule.weights)
    rhs = np.einsum("iqc,jqc,q->ij", ivals, fvals, rule.weights)
    coeffs = np.linalg.solve(gram, rhs)
    residual = fvals - np.einsum("ij,iqc->jqc", coeffs, ivals)
    err = np.einsum("jqc,jqc,q->j", residual, residual, rule.weights)
    norm = np.einsum("jqc,jqc,q->j", fvals, fvals, rule.weights)
    scale = np.where(norm > 0, norm, 1.0)
    return float(np.sqrt((err / scale).max()))


def _divergence_basis(basis: PolyBasis) -> PolyBasis:
    """Divergences of a vector basis (or row-wise divergences of a matrix basis) as a basis."""
    grads = basis.gradient_basis()
    ncomp = basis.ncomp
    if ncomp == 2:
        coeffs = grads.coeffs[:, 0, :] + grads.coeffs[:, 3, :]
        return PolyBasis(basis.center, basis.scale, basis.degree, coeffs[:, None, :], (), f"div {basis.name}")
    # matrix basis: component c = 2a + b, gradient component 2c + d; (div tau)_a = sum_b d_b tau_ab
    coeffs = np.stack(
        [grads.coeffs[:, 2 * (2 * a + 0) + 0, :] + grads.coeffs[:, 2 * (2 * a + 1) + 1, :] for a in range(2)],
        axis=1,
    )
    return PolyBasis(basis.center, basis.scale, basis.degree, coeffs, (2,), f"div {basis.name}")


def self_check(config: MethodConfig, cell: CellGeometry) -> dict[str, float]:
    """
    Verify the claimed inclusions on one cell: grad P_T in U_T (DT), div U_T in P_T (GT),
    div Sigma_T in U_T (ET), plus the face-degree conditions. Also checks that the cell-average
    closure is only used where pi_P0 o I_{U,T} = pi_P0.
    """
    spaces = config.local_spaces(cell)
    results: dict[str, float] = {}

    def require(check: str, residual: float) -> None:
        results[check] = residual
        if residual > INCLUSION_TOLERANCE:
            raise SelfCheckError(config.name, check, residual)

    if "DT" in config.claims:
        require("grad P_T in U_T", _projection_residual(spaces, spaces.pt.gradient_basis(), spaces.ut))
        require("tr P_T in U_F.n", float(max(config.pt_degree - config.uf_degree, 0)))
    if "GT" in config.claims:
        require("div U_T in P_T", _projection_residual(spaces, _divergence_basis(spaces.ut), spaces.pt))
        require("U_F.n in P_F", float(max(config.uf_degree - config.pf_degree, 0)))
    if "ET" in config.claims:
        require("div Sigma_T in U_T", _projection_residual(spaces, _divergence_basis(spaces.sigma), spaces.ut))
        require("Sigma_T n in U_F", float(max(config.sigma_degree - config.uf_degree, 0)))

    defect = average_defect(spaces, config.ut_degree)
    if config.closure is ClosureCase.CELL_AVERAGE:
        require("pi_P0 o I_UT = pi_P0", defect)
    else:
        results["pi_P0 o I_UT = pi_P0"] = defect
        logger.debug(f"{config.label()}: face-average closure, mean defect {results['pi_P0 o I_UT = pi_P0']:.3e}")
    return results


def average_defect(spaces: LocalSpaces, degree: int, seed: int = 0) -> float:
    """
    Relative mismatch between the means of I_{U,T} v and v for a random field v of ``degree``.
    Called with the degree of U_T: the closure only sees interpolates of P^{deg U_T}(T)^2.
    """
    rng = np.random.default_rng(seed)
    field_basis = vector_basis(spaces.cell, degree, orthonormal=False)
    coeffs = rng.uniform(-1.0, 1.0, field_basis.dim)
    interp = spaces.iut.matrix_for(field_basis) @ coeffs
    rule = spaces.cell.rule(2 * degree)
    mean_v = np.einsum("i,iqc,q->c", coeffs, field_basis.values(rule.points), rule.weights)
    mean_i = np.einsum("i,iqc,q->c", interp, spaces.ut.values(rule.points), rule.weights)
    return float(np.linalg.norm(mean_v - mean_i) / max(np.linalg.norm(mean_v), 1e-300))
