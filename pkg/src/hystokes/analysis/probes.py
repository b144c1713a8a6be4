"""
Stability probes: quantities whose boundedness the stability analysis guarantees but whose
constants are not known in closed form.

Every probe is reported per refinement level; ``ProbeReport`` only decides whether the trend stays
bounded (or positive). Eigenvalue probes work on dense matrices and are limited to coarse meshes.
"""

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd
import scipy.linalg
from numpy.typing import NDArray

from ..mesh.mesh import Mesh
from ..scheme.assembly import DofMap, GlobalSystem
from ..scheme.element import LocalElement
from ..scheme.methods import MethodConfig
from ..scheme.pipeline import HyStokesPipeline, RunResult
from ..utils.logger import get_logger
from .norms import NormCalculator, forcing_l2_norm, gram_1h
from .problems import manufactured, scaled, zero_problem
from .studies import study_meshes

logger = get_logger(__name__)

DENSE_PROBE_LIMIT = 2000
BOUNDED_GROWTH = 4.0
SCALING_FACTOR = 1e-3
INF_SUP_FLOOR = 1e-8

PROBE_COLUMNS = (
    "h",
    "size",
    "asymmetry",
    "apriori_ratio",
    "poincare_solution",
    "poincare_random",
    "a_min",
    "a_max",
    "inf_sup",
    "zero_forcing",
    "scaling_defect",
)


class ProbeSizeError(ValueError):
    """Raised when a dense probe is requested on a system that is too large."""

    def __init__(self, size: int, limit: int):
        super().__init__(f"Dense probe needs at most {limit} unknowns, system has {size}")


def _check_dense(dofmap: DofMap, limit: int = DENSE_PROBE_LIMIT) -> None:
    if dofmap.size > limit:
        raise ProbeSizeError(dofmap.size, limit)


def _velocity_block(dofmap: DofMap) -> slice:
    return slice(0, dofmap.n_velocity)


def _pressure_block(dofmap: DofMap) -> slice:
    return slice(dofmap.pt_offset, dofmap.multiplier)


def velocity_gram(elements: list[LocalElement], dofmap: DofMap) -> NDArray[np.float64]:
    """Dense Gram matrix of ||.||_{1,h}^2 on U_h0."""
    n = dofmap.n_velocity
    gram = np.zeros((n, n))
    cache: dict[int, NDArray[np.float64]] = {}
    for element in elements:
        local = cache.get(id(element.kernel))
        if local is None:
            local = cache[id(element.kernel)] = gram_1h(element.spaces)
        idx = dofmap.velocity_indices(element)
        keep = idx >= 0
        gram[np.ix_(idx[keep], idx[keep])] += local[np.ix_(keep, keep)]
    return gram


def pressure_grams(elements: list[LocalElement], dofmap: DofMap) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Dense Gram matrices of ||.||_{P,h}^2 and |.|_{0,h}^2 on the pressure unknowns."""
    calc = NormCalculator(elements, dofmap)
    offset = dofmap.pt_offset
    n = dofmap.multiplier - offset
    norm_p = np.zeros((n, n))
    jumps = np.zeros((n, n))
    for element in elements:
        grams = calc.grams(element)
        idx = dofmap.pressure_indices(element) - offset
        block = np.ix_(idx, idx)
        norm_p[block] += grams.pt_mass + grams.pgrad_scaled
        jumps[block] += grams.pressure_jumps
    return norm_p, jumps


def norm_equivalence(system: GlobalSystem) -> tuple[float, float]:
    """Extreme generalized eigenvalues of a_h against the ||.||_{1,h} Gram matrix on U_h0."""
    dofmap = system.dofmap
    _check_dense(dofmap)
    block = _velocity_block(dofmap)
    a = system.matrix[block, block].toarray() / system.nu
    gram = velocity_gram(system.elements, dofmap)
    eigenvalues = scipy.linalg.eigh(0.5 * (a + a.T), gram, eigvals_only=True)
    return float(eigenvalues.min()), float(eigenvalues.max())


def inf_sup_constant(system: GlobalSystem) -> float:
    """
    Largest beta with beta ||q||_{P,h} <= sup_v b_h(v, q) / ||v||_{1,h} + delta |q|_{0,h} on P_h0,
    from the generalized eigenproblem (B N^-1 B^T + delta D) z = beta^2 M z on the zero-mean subspace.
    """
    dofmap = system.dofmap
    _check_dense(dofmap)
    v_block = _velocity_block(dofmap)
    p_block = _pressure_block(dofmap)
    b = system.matrix[p_block, v_block].toarray()
    gram = velocity_gram(system.elements, dofmap)
    norm_p, jumps = pressure_grams(system.elements, dofmap)

    schur = b @ scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), b.T)
    if system.config.delta:
        schur = schur + system.config.delta * jumps
    mean_row = system.matrix[dofmap.multiplier, p_block].toarray()
    basis = scipy.linalg.null_space(mean_row)
    reduced = basis.T @ schur @ basis
    reduced_norm = basis.T @ norm_p @ basis
    smallest = scipy.linalg.eigh(
        0.5 * (reduced + reduced.T), 0.5 * (reduced_norm + reduced_norm.T), eigvals_only=True, subset_by_index=[0, 0]
    )
    return float(np.sqrt(max(float(smallest[0]), 0.0)))


def apriori_ratio(result: RunResult) -> float:
    """||(u_h, p_h)||_{nu,h} / (nu^-1/2 ||f||)."""
    calc = NormCalculator(result.elements, result.solution.dofmap)
    nu = result.problem.nu
    energy = calc.norm_nuh(result.solution.coefficients, nu, result.config.delta)
    forcing = forcing_l2_norm(result.elements, result.problem.f)
    return energy / max(forcing / np.sqrt(nu), 1e-300)


def poincare_ratio(elements: list[LocalElement], dofmap: DofMap, x: NDArray[np.float64]) -> float:
    """||v_h||_{L2} / ||v_h||_{1,h}."""
    calc = NormCalculator(elements, dofmap)
    return calc.velocity_l2(x) / max(calc.norm_1h(x), 1e-300)


def random_velocity_field(dofmap: DofMap, rng: np.random.Generator) -> NDArray[np.float64]:
    """Random hybrid velocity in U_h0 (boundary faces carry no unknowns), zero pressure."""
    x = np.zeros(dofmap.size)
    x[_velocity_block(dofmap)] = rng.uniform(-1.0, 1.0, dofmap.n_velocity)
    return x


def zero_forcing_solution(pipeline: HyStokesPipeline, mesh: Mesh, config: MethodConfig) -> float:
    """max |x| of the discrete solution for f = 0."""
    result = pipeline.run(mesh, config, zero_problem(), compute_errors=False)
    return float(np.abs(result.solution.coefficients).max())


def scaling_defect(
    pipeline: HyStokesPipeline, mesh: Mesh, config: MethodConfig, nu: float = 1.0, factor: float = SCALING_FACTOR
) -> float:
    """Relative mismatch between the solution for (c nu, c f) and the velocity / c-scaled pressure for (nu, f)."""
    problem = manufactured(nu)
    base = pipeline.run(mesh, config, problem, compute_errors=False)
    other = pipeline.run(mesh, config, scaled(problem, factor), compute_errors=False)
    dofmap = base.solution.dofmap
    expected = base.solution.coefficients.copy()
    expected[dofmap.pt_offset : dofmap.multiplier] *= factor
    actual = other.solution.coefficients
    return float(np.linalg.norm(actual - expected) / max(np.linalg.norm(expected), 1e-300))


@dataclass
class ProbeReport:
    method: str
    k: int
    mesh_family: str
    nu: float
    table: pd.DataFrame
    manifest: dict[str, Any] = field(default_factory=dict)

    def growth(self, column: str) -> float:
        """max / min of a column over the levels (1 for an empty column)."""
        values = self.table[column].dropna().to_numpy(dtype=float)
        if len(values) == 0:
            return 1.0
        if values.min() <= 0:
            return float("inf")
        return float(values.max() / values.min())

    def bounded(self, columns: tuple[str, ...] = ("apriori_ratio", "poincare_solution", "poincare_random")) -> bool:
        return all(self.growth(column) <= BOUNDED_GROWTH for column in columns)

    def inf_sup_positive(self) -> bool:
        values = self.table["inf_sup"].dropna()
        return bool(len(values) and (values > INF_SUP_FLOOR).all())

    def to_csv(self) -> str:
        return self.table.to_csv(index=False, float_format="%.6e", na_rep="")


def stability_probes(
    pipeline: HyStokesPipeline,
    method: str,
    k: int,
    mesh_family: str,
    levels: int = 3,
    nu: float = 1.0,
    seed: int = 42,
    overrides: dict[str, Any] | None = None,
    dense: bool = True,
) -> ProbeReport:
    """Run every stability probe on ``levels`` refinements of a mesh family."""
    rng = np.random.default_rng(seed)
    rows: list[dict[str, Any]] = []
    for mesh in study_meshes(mesh_family, levels):
        config = pipeline.configure(method, k, mesh, **(overrides or {}))
        result = pipeline.run(mesh, config, manufactured(nu), compute_errors=False)
        system = result.system
        dofmap = system.dofmap
        row: dict[str, Any] = {
            "h": mesh.h,
            "size": dofmap.condensed_size(),
            "asymmetry": system.asymmetry,
            "apriori_ratio": apriori_ratio(result),
            "poincare_solution": poincare_ratio(result.elements, dofmap, result.solution.coefficients),
            "poincare_random": poincare_ratio(result.elements, dofmap, random_velocity_field(dofmap, rng)),
            "a_min": np.nan,
            "a_max": np.nan,
            "inf_sup": np.nan,
            "zero_forcing": zero_forcing_solution(pipeline, mesh, config),
            "scaling_defect": scaling_defect(pipeline, mesh, config, nu),
        }
        if dense and dofmap.size <= DENSE_PROBE_LIMIT:
            row["a_min"], row["a_max"] = norm_equivalence(system)
            row["inf_sup"] = inf_sup_constant(system)
        elif dense:
            logger.info(f"Skipping dense probes on {mesh.name} ({dofmap.size} unknowns)")
        rows.append(row)
        logger.info(
            f"Probes {config.label()} {mesh.name}: apriori={row['apriori_ratio']:.3e} "
            f"poincare={row['poincare_solution']:.3e} inf_sup={row['inf_sup']:.3e}"
        )

    name = pipeline.registry.resolve(method)
    table = pd.DataFrame(rows, columns=list(PROBE_COLUMNS))
    return ProbeReport(name, k, mesh_family, nu, table)
