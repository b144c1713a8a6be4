"""
Static condensation and direct solution of the assembled system.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from ..utils.logger import get_logger
from .assembly import CondensationData, DofMap, GlobalSystem
from .element import LocalElement

logger = get_logger(__name__)


class SingularSystemError(RuntimeError):
    """Raised when the factorization of the global system fails."""

    def __init__(self, size: int, reason: str):
        super().__init__(f"Singular system of size {size}: {reason}")


class ResidualError(RuntimeError):
    """Raised when the solution misses the relative algebraic residual tolerance."""

    def __init__(self, size: int, residual: float, tolerance: float):
        super().__init__(f"System of size {size}: relative residual {residual:.3e} exceeds {tolerance:.0e}")
        self.residual = residual


class CondensationError(RuntimeError):
    """Raised when static condensation cannot be performed."""

    def __init__(self, reason: str):
        super().__init__(f"Static condensation failed: {reason}")


def interior_indices(system: GlobalSystem, element: LocalElement) -> NDArray[np.int64]:
    """Cell velocities and all cell pressures except the mean (first orthonormal function)."""
    dofmap = system.dofmap
    return np.concatenate([dofmap.ut(element.index), dofmap.pt(element.index)[1:]])


def condense(system: GlobalSystem) -> GlobalSystem:
    """Eliminate cell-interior unknowns through per-cell Schur complements."""
    if system.condensed:
        raise CondensationError("system is already condensed")

    matrix = system.matrix.tocsr()
    interior_parts = [interior_indices(system, element) for element in system.elements]
    interior = np.concatenate(interior_parts)
    mask = np.ones(system.full_size, dtype=bool)
    mask[interior] = False
    skeleton = np.flatnonzero(mask)

    inverses = []
    for element, idx in zip(system.elements, interior_parts, strict=True):
        block = matrix[idx][:, idx].toarray()
        try:
            inverses.append(scipy.linalg.inv(block))
        except (np.linalg.LinAlgError, ValueError) as e:
            raise CondensationError(f"singular interior block on cell {element.index}") from e
        if not np.all(np.isfinite(inverses[-1])):
            raise CondensationError(f"singular interior block on cell {element.index}")
    interior_inverse = sp.block_diag(inverses, format="csr")

    k_ii_s = matrix[interior][:, skeleton]
    k_s_i = matrix[skeleton][:, interior]
    schur = (matrix[skeleton][:, skeleton] - k_s_i @ (interior_inverse @ k_ii_s)).tocsr()
    rhs = system.rhs[skeleton] - k_s_i @ (interior_inverse @ system.rhs[interior])

    logger.info(f"Condensed system: {system.full_size} -> {len(skeleton)} unknowns")
    return GlobalSystem(
        matrix=schur,
        rhs=np.asarray(rhs).ravel(),
        dofmap=system.dofmap,
        config=system.config,
        nu=system.nu,
        elements=system.elements,
        asymmetry=system.asymmetry,
        condensation=CondensationData(
            interior=interior,
            skeleton=skeleton,
            interior_inverse=interior_inverse,
            interior_skeleton=k_ii_s.tocsr(),
            interior_rhs=system.rhs[interior],
        ),
    )


@dataclass
class HybridSolution:
    """Full coefficient vector in the ``DofMap`` ordering."""

    coefficients: NDArray[np.float64]
    dofmap: DofMap
    nu: float
    residual: float
    solved_size: int

    @property
    def multiplier(self) -> float:
        return float(self.coefficients[self.dofmap.multiplier])

    def local_velocity(self, element: LocalElement) -> NDArray[np.float64]:
        idx = self.dofmap.velocity_indices(element)
        out = np.zeros(len(idx))
        keep = idx >= 0
        out[keep] = self.coefficients[idx[keep]]
        return out

    def local_pressure(self, element: LocalElement) -> NDArray[np.float64]:
        return self.coefficients[self.dofmap.pressure_indices(element)]

    def scaled(self, factor: float) -> "HybridSolution":
        return HybridSolution(self.coefficients * factor, self.dofmap, self.nu, self.residual, self.solved_size)

    def to_dict(self, manifest: dict[str, Any] | None = None) -> dict[str, Any]:
        d = self.dofmap
        c = self.coefficients
        return {
            "manifest": manifest or {},
            "dofmap": d.describe(),
            "nu": self.nu,
            "residual": self.residual,
            "solved_size": self.solved_size,
            "multiplier": self.multiplier,
            "u_T": c[: d.uf_offset].reshape(d.n_cells, d.n_ut).tolist(),
            "u_F": c[d.uf_offset : d.pt_offset].reshape(len(d.internal_faces), d.n_uf).tolist(),
            "internal_faces": [int(f) for f in d.internal_faces],
            "p_T": c[d.pt_offset : d.pf_offset].reshape(d.n_cells, d.n_pt).tolist(),
            "p_F": c[d.pf_offset : d.multiplier].reshape(d.n_faces, d.n_pf).tolist(),
        }

    def save(self, path: Path, manifest: dict[str, Any] | None = None) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(manifest), f, indent=1)
        logger.debug(f"Solution written to {path}")


def _dense_solve(matrix: sp.csr_matrix, rhs: NDArray[np.float64]) -> NDArray[np.float64]:
    try:
        return np.asarray(scipy.linalg.solve(matrix.toarray(), rhs, assume_a="sym"))
    except (np.linalg.LinAlgError, ValueError) as e:
        raise SingularSystemError(matrix.shape[0], str(e)) from e


def _factorize_and_solve(
    matrix: sp.csr_matrix, rhs: NDArray[np.float64], dense_fallback_limit: int
) -> NDArray[np.float64]:
    n = matrix.shape[0]
    try:
        return np.asarray(spla.splu(matrix.tocsc()).solve(rhs))
    except RuntimeError as e:
        if n > dense_fallback_limit:
            raise SingularSystemError(n, str(e)) from e
        logger.warning(f"Sparse factorization failed ({e}); retrying with a dense symmetric solve")
    return _dense_solve(matrix, rhs)


def relative_residual(matrix: sp.csr_matrix, rhs: NDArray[np.float64], x: NDArray[np.float64]) -> float:
    """||A x - b|| / max(||b||, max|A| ||x||)."""
    if not np.all(np.isfinite(x)):
        raise SingularSystemError(matrix.shape[0], "non-finite solution")
    scale = max(float(np.linalg.norm(rhs)), float(abs(matrix).max() * np.linalg.norm(x)), 1e-300)
    return float(np.linalg.norm(matrix @ x - rhs) / scale)


def solve(system: GlobalSystem, residual_tolerance: float = 1e-10, dense_fallback_limit: int = 5000) -> HybridSolution:
    """
    Solve the (possibly condensed) system and return the full hybrid solution.

    A sparse solution whose relative residual exceeds ``residual_tolerance`` is recomputed with a
    dense symmetric solve (systems up to ``dense_fallback_limit``). ``ResidualError`` if it still misses.
    """
    x = _factorize_and_solve(system.matrix, system.rhs, dense_fallback_limit)
    residual = relative_residual(system.matrix, system.rhs, x)
    if residual > residual_tolerance:
        if system.size > dense_fallback_limit:
            raise ResidualError(system.size, residual, residual_tolerance)
        logger.warning(
            f"Relative algebraic residual {residual:.3e} exceeds {residual_tolerance:.0e}; "
            "retrying with a dense symmetric solve"
        )
        x = _dense_solve(system.matrix, system.rhs)
        residual = relative_residual(system.matrix, system.rhs, x)
        if residual > residual_tolerance:
            raise ResidualError(system.size, residual, residual_tolerance)

    cond = system.condensation
    if cond is None:
        full = x
    else:
        full = np.zeros(system.full_size)
        full[cond.skeleton] = x
        full[cond.interior] = cond.interior_inverse @ (cond.interior_rhs - cond.interior_skeleton @ x)

    logger.info(f"Solved system of size {system.size} (relative residual {residual:.2e})")
    return HybridSolution(full, system.dofmap, system.nu, residual, system.size)
