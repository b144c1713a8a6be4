"""
Convergence studies and pressure-robustness sweeps.

Study tables follow the column order of the published tables: h, k, size, then every error
followed by its observed convergence rate (OCV).
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from ..mesh.generators import family_mesh
from ..mesh.mesh import Mesh
from ..scheme.pipeline import HyStokesPipeline
from ..utils.logger import get_logger
from .norms import ERROR_COLUMNS
from .problems import manufactured

logger = get_logger(__name__)

FLOAT_FORMAT = "%.6e"  # 7 significant digits
OCV_COLUMNS = {name: "ocv_" + name.removeprefix("e_") for name in ERROR_COLUMNS}
VELOCITY_COLUMNS = ERROR_COLUMNS[:4]
AUXILIARY_COLUMNS = ("e_grad_p", "full_size")
ROBUSTNESS_TOLERANCE = 1e-6
DEGRADED_VISCOSITY = 1e-9


def observed_rates(errors: list[float] | np.ndarray, h: list[float] | np.ndarray) -> list[float | None]:
    """OCV_i = log(e_{i-1} / e_i) / log(h_{i-1} / h_i); undefined on the first level."""
    e = np.asarray(errors, dtype=float)
    hh = np.asarray(h, dtype=float)
    rates: list[float | None] = [None]
    for i in range(1, len(e)):
        if e[i] <= 0 or e[i - 1] <= 0 or hh[i] == hh[i - 1]:
            rates.append(None)
        else:
            rates.append(float(np.log(e[i - 1] / e[i]) / np.log(hh[i - 1] / hh[i])))
    return rates


def study_columns() -> list[str]:
    columns = ["h", "k", "size"]
    for name in ERROR_COLUMNS:
        columns += [name, OCV_COLUMNS[name]]
    return columns + list(AUXILIARY_COLUMNS)


@dataclass
class StudyResult:
    method: str
    nu: float
    mesh_family: str
    table: pd.DataFrame
    manifest: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_rows(
        cls,
        method: str,
        nu: float,
        mesh_family: str,
        rows: list[dict[str, Any]],
        manifest: dict[str, Any] | None = None,
    ) -> "StudyResult":
        """Build the table from raw error rows; OCV columns are computed per degree k."""
        frame = pd.DataFrame(rows)
        if frame.empty:
            return cls(method, nu, mesh_family, pd.DataFrame(columns=study_columns()), manifest or {})
        for name in ERROR_COLUMNS:
            frame[OCV_COLUMNS[name]] = np.nan
            for _, group in frame.groupby("k", sort=False):
                rates = observed_rates(group[name].to_numpy(), group["h"].to_numpy())
                frame.loc[group.index, OCV_COLUMNS[name]] = [np.nan if r is None else r for r in rates]
        frame = frame.reindex(columns=study_columns())
        return cls(method, nu, mesh_family, frame.reset_index(drop=True), manifest or {})

    @property
    def rows(self) -> list[dict[str, Any]]:
        return list(self.table.to_dict(orient="records"))

    def finest(self, k: int) -> pd.Series:
        group = self.table[self.table["k"] == k]
        return group.iloc[-1]

    def to_csv(self, path: Path | None = None) -> str:
        text = self.table.to_csv(index=False, float_format=FLOAT_FORMAT, na_rep="")
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        return text

    def to_dict(self) -> dict[str, Any]:
        table = self.table.astype(object).where(self.table.notna(), None)
        return {
            "manifest": self.manifest,
            "method": self.method,
            "nu": self.nu,
            "mesh_family": self.mesh_family,
            "columns": list(self.table.columns),
            "rows": table.to_dict(orient="records"),
        }

    def to_json(self, path: Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=1, default=str)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        return text


def study_meshes(mesh_family: str, levels: int) -> list[Mesh]:
    if levels < 1:
        error_msg = f"levels must be at least 1, got {levels}"
        raise ValueError(error_msg)
    return [family_mesh(mesh_family, level) for level in range(levels)]


def convergence_study(
    pipeline: HyStokesPipeline,
    method: str,
    ks: list[int],
    mesh_family: str,
    levels: int,
    nu: float = 1.0,
    overrides: dict[str, Any] | None = None,
    manifest: dict[str, Any] | None = None,
) -> StudyResult:
    """Solve the manufactured problem on successive refinements for every degree in ``ks``."""
    meshes = study_meshes(mesh_family, levels)
    problem = manufactured(nu)
    rows: list[dict[str, Any]] = []
    for k in ks:
        for mesh in meshes:
            config = pipeline.configure(method, k, mesh, **(overrides or {}))
            result = pipeline.run(mesh, config, problem)
            rows.append(result.row())
            logger.info(f"{config.label()} {mesh.name}: e_1h={rows[-1]['e_1h']:.6e} e_p={rows[-1]['e_p']:.6e}")

    name = pipeline.registry.resolve(method)
    study = StudyResult.from_rows(name, nu, mesh_family, rows, manifest)
    pipeline.archive_rows(rows, study.manifest)
    return study


@dataclass
class RobustnessReport:
    """Per-viscosity studies plus the comparison of their velocity errors and pressure scaling."""

    method: str
    k: int
    studies: list[StudyResult]
    velocity_mismatch: dict[float, float]  # max relative difference to the first viscosity
    pressure_scaling: dict[float, float]  # max relative deviation of e_p(nu) from nu / nu_0 e_p(nu_0)
    flagged: list[float] = field(default_factory=list)

    def robust(self, tolerance: float = ROBUSTNESS_TOLERANCE) -> bool:
        checked = [nu for nu in self.velocity_mismatch if nu not in self.flagged]
        return all(self.velocity_mismatch[nu] <= tolerance for nu in checked)

    def summary(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "nu": list(self.velocity_mismatch),
                "velocity_mismatch": list(self.velocity_mismatch.values()),
                "pressure_scaling": [self.pressure_scaling[nu] for nu in self.velocity_mismatch],
                "flagged": [nu in self.flagged for nu in self.velocity_mismatch],
            }
        )


def _relative_difference(a: np.ndarray, b: np.ndarray) -> float:
    scale = np.maximum(np.abs(b), 1e-300)
    return float(np.max(np.abs(a - b) / scale))


def robustness_sweep(
    pipeline: HyStokesPipeline,
    method: str,
    k: int,
    mesh_family: str,
    levels: int,
    nus: list[float],
    overrides: dict[str, Any] | None = None,
    manifest: dict[str, Any] | None = None,
) -> RobustnessReport:
    """
    Solve for every viscosity in ``nus`` on the same meshes. Velocity errors of pressure-robust
    methods do not depend on nu and pressure errors scale like nu.
    """
    if not nus:
        error_msg = "robustness sweep needs at least one viscosity"
        raise ValueError(error_msg)
    name = pipeline.registry.resolve(method)
    if pipeline.registry.get_spec(name).delta:
        logger.warning(f"{name} uses pressure stabilization; velocity errors are not expected to be nu-invariant")

    meshes = study_meshes(mesh_family, levels)
    studies: list[StudyResult] = []
    for nu in nus:
        rows: list[dict[str, Any]] = []
        problem = manufactured(nu)
        for mesh in meshes:
            config = pipeline.configure(method, k, mesh, **(overrides or {}))
            rows.append(pipeline.run(mesh, config, problem).row())
        studies.append(StudyResult.from_rows(name, nu, mesh_family, rows, {**(manifest or {}), "nu": nu}))
        pipeline.archive_rows(rows, studies[-1].manifest)

    reference = studies[0]
    ref_velocity = reference.table[list(VELOCITY_COLUMNS)].to_numpy(dtype=float)
    ref_pressure = reference.table["e_p"].to_numpy(dtype=float)
    velocity_mismatch: dict[float, float] = {}
    pressure_scaling: dict[float, float] = {}
    flagged: list[float] = []
    for nu, study in zip(nus, studies, strict=True):
        velocity = study.table[list(VELOCITY_COLUMNS)].to_numpy(dtype=float)
        velocity_mismatch[nu] = _relative_difference(velocity, ref_velocity)
        expected_p = ref_pressure * nu / reference.nu
        pressure_scaling[nu] = _relative_difference(study.table["e_p"].to_numpy(dtype=float), expected_p)
        if nu <= DEGRADED_VISCOSITY and velocity_mismatch[nu] > ROBUSTNESS_TOLERANCE:
            flagged.append(nu)
            logger.warning(
                f"{name} k={k} nu={nu:g}: velocity errors drift by {velocity_mismatch[nu]:.2e} (roundoff regime)"
            )

    report = RobustnessReport(name, k, studies, velocity_mismatch, pressure_scaling, flagged)
    logger.info(
        f"Robustness {name} k={k}: max velocity mismatch "
        f"{max(velocity_mismatch.values()):.2e}, max pressure scaling defect {max(pressure_scaling.values()):.2e}"
    )
    return report
