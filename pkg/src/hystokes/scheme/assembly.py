"""
Global degrees of freedom and assembly of the symmetric saddle-point system.

Unknown ordering (so reported sizes are auditable):

    [ u_T for every cell | u_F for every internal face | p_T for every cell | p_F for every face | lambda ]

Boundary-face velocities are eliminated (homogeneous Dirichlet data). The second block row of the
scheme is negated so that the matrix reads

    [ nu A    B^T             0  ]
    [ B      -delta/nu D      L^T ]
    [ 0       L               0  ]

where L integrates the cell pressures (zero-mean constraint through one multiplier).
"""

from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray

from ..mesh.mesh import Mesh
from ..utils.logger import get_logger
from .element import LocalElement, build_elements
from .methods import MethodConfig

logger = get_logger(__name__)

VectorField = Callable[[NDArray[np.float64]], NDArray[np.float64]]

SYMMETRY_TOLERANCE = 1e-12
MANUFACTURED_FORCING_DEGREE = 6


@dataclass(frozen=True)
class DofMap:
    n_cells: int
    n_faces: int
    internal_faces: NDArray[np.int64]
    n_ut: int
    n_uf: int
    n_pt: int
    n_pf: int
    face_slot: NDArray[np.int64] = field(repr=False)  # position among internal faces, -1 on the boundary

    @classmethod
    def build(cls, mesh: Mesh, n_ut: int, n_uf: int, n_pt: int, n_pf: int) -> "DofMap":
        slot = np.full(mesh.n_faces, -1, dtype=np.int64)
        slot[mesh.internal_faces] = np.arange(len(mesh.internal_faces))
        return cls(mesh.n_cells, mesh.n_faces, mesh.internal_faces, n_ut, n_uf, n_pt, n_pf, slot)

    @property
    def uf_offset(self) -> int:
        return self.n_cells * self.n_ut

    @property
    def pt_offset(self) -> int:
        return self.uf_offset + len(self.internal_faces) * self.n_uf

    @property
    def pf_offset(self) -> int:
        return self.pt_offset + self.n_cells * self.n_pt

    @property
    def multiplier(self) -> int:
        return self.pf_offset + self.n_faces * self.n_pf

    @property
    def n_velocity(self) -> int:
        return self.pt_offset

    @property
    def size(self) -> int:
        return self.multiplier + 1

    def ut(self, cell: int) -> NDArray[np.int64]:
        return np.arange(cell * self.n_ut, (cell + 1) * self.n_ut)

    def uf(self, face: int) -> NDArray[np.int64] | None:
        slot = int(self.face_slot[face])
        if slot < 0:
            return None
        start = self.uf_offset + slot * self.n_uf
        return np.arange(start, start + self.n_uf)

    def pt(self, cell: int) -> NDArray[np.int64]:
        start = self.pt_offset + cell * self.n_pt
        return np.arange(start, start + self.n_pt)

    def pf(self, face: int) -> NDArray[np.int64]:
        start = self.pf_offset + face * self.n_pf
        return np.arange(start, start + self.n_pf)

    def velocity_indices(self, element: LocalElement) -> NDArray[np.int64]:
        """Global index of each local velocity dof, -1 for eliminated boundary-face dofs."""
        parts = [self.ut(element.index)]
        for f in element.faces:
            idx = self.uf(f)
            parts.append(idx if idx is not None else np.full(self.n_uf, -1, dtype=np.int64))
        return np.concatenate(parts)

    def pressure_indices(self, element: LocalElement) -> NDArray[np.int64]:
        return np.concatenate([self.pt(element.index)] + [self.pf(f) for f in element.faces])

    def condensed_size(self) -> int:
        """Size after eliminating cell velocities and all but the mean cell pressure."""
        return len(self.internal_faces) * self.n_uf + self.n_cells + self.n_faces * self.n_pf + 1

    def describe(self) -> dict[str, Any]:
        return {
            "ordering": ["u_T", "u_F(internal)", "p_T", "p_F", "lambda"],
            "n_cells": self.n_cells,
            "n_faces": self.n_faces,
            "n_internal_faces": int(len(self.internal_faces)),
            "dofs_per_cell_velocity": self.n_ut,
            "dofs_per_face_velocity": self.n_uf,
            "dofs_per_cell_pressure": self.n_pt,
            "dofs_per_face_pressure": self.n_pf,
            "offsets": {
                "u_F": self.uf_offset,
                "p_T": self.pt_offset,
                "p_F": self.pf_offset,
                "lambda": self.multiplier,
            },
            "size": self.size,
        }


@dataclass
class CondensationData:
    interior: NDArray[np.int64]
    skeleton: NDArray[np.int64]
    interior_inverse: sp.csr_matrix
    interior_skeleton: sp.csr_matrix
    interior_rhs: NDArray[np.float64]


@dataclass
class GlobalSystem:
    matrix: sp.csr_matrix
    rhs: NDArray[np.float64]
    dofmap: DofMap
    config: MethodConfig
    nu: float
    elements: list[LocalElement]
    asymmetry: float = 0.0
    condensation: CondensationData | None = None

    @property
    def condensed(self) -> bool:
        return self.condensation is not None

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def full_size(self) -> int:
        return self.dofmap.size


def relative_asymmetry(matrix: sp.spmatrix) -> float:
    scale = abs(matrix).max()
    if scale == 0:
        return 0.0
    return float(abs(matrix - matrix.T).max() / scale)


def forcing_vector(
    elements: list[LocalElement], dofmap: DofMap, f: VectorField, degree: int
) -> NDArray[np.float64]:
    """int_T f . phi for every cell-velocity basis function; zero elsewhere."""
    rhs = np.zeros(dofmap.size)
    for element in elements:
        spaces = element.spaces
        rule = spaces.cell.rule(degree)
        values = np.asarray(f(element.to_global(rule.points)), dtype=float)
        rhs[dofmap.ut(element.index)] = np.einsum("iqc,qc,q->i", spaces.ut.values(rule.points), values, rule.weights)
    return rhs


def assemble(
    mesh: Mesh,
    config: MethodConfig,
    nu: float,
    f: VectorField,
    forcing_extra: int = 9,
    threads: int = 1,
    elements: list[LocalElement] | None = None,
) -> GlobalSystem:
    """Assemble the full (uncondensed) hybrid system for viscosity ``nu`` and forcing ``f``."""
    if nu <= 0:
        error_msg = f"viscosity must be positive, got {nu}"
        raise ValueError(error_msg)
    if elements is None:
        elements = build_elements(mesh, config, nu, threads)
    layout = elements[0].spaces.layout
    dofmap = DofMap.build(mesh, layout.n_ut, layout.n_uf, layout.n_pt, layout.n_pf)

    rows: list[NDArray[np.int64]] = []
    cols: list[NDArray[np.int64]] = []
    vals: list[NDArray[np.float64]] = []

    def add_block(r_idx: NDArray[np.int64], c_idx: NDArray[np.int64], block: NDArray[np.float64]) -> None:
        r_keep = r_idx >= 0
        c_keep = c_idx >= 0
        sub = block[np.ix_(r_keep, c_keep)]
        rr, cc = np.meshgrid(r_idx[r_keep], c_idx[c_keep], indexing="ij")
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        vals.append(sub.ravel())

    pressure_scale = config.delta / nu
    multiplier_row = np.zeros(dofmap.size)
    for element in elements:
        forms = element.forms
        v_idx = dofmap.velocity_indices(element)
        p_idx = dofmap.pressure_indices(element)
        add_block(v_idx, v_idx, nu * forms.a)
        add_block(p_idx, v_idx, forms.b)
        add_block(v_idx, p_idx, forms.b.T)
        if config.delta:
            add_block(p_idx, p_idx, -pressure_scale * forms.d)
        spaces = element.spaces
        multiplier_row[dofmap.pt(element.index)] = spaces.rule.integrate(spaces.pt.values(spaces.rule.points)[:, :, 0])

    lam = dofmap.multiplier
    nz = np.flatnonzero(multiplier_row)
    rows += [np.full(len(nz), lam), nz]
    cols += [nz, np.full(len(nz), lam)]
    vals += [multiplier_row[nz], multiplier_row[nz]]

    matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dofmap.size, dofmap.size)
    )
    matrix.sum_duplicates()

    forcing_degree = config.k + forcing_extra
    if forcing_degree < config.ut_degree + MANUFACTURED_FORCING_DEGREE:
        logger.warning(
            f"Forcing quadrature degree {forcing_degree} may under-resolve a degree-{MANUFACTURED_FORCING_DEGREE} "
            f"forcing against degree-{config.ut_degree} velocities"
        )
    rhs = forcing_vector(elements, dofmap, f, forcing_degree)

    asymmetry = relative_asymmetry(matrix)
    if asymmetry > SYMMETRY_TOLERANCE:
        logger.warning(f"Assembled matrix asymmetry {asymmetry:.3e} exceeds {SYMMETRY_TOLERANCE:.0e}")
    logger.info(
        f"Assembled {config.label()} on {mesh.name}: {dofmap.size} unknowns, {matrix.nnz} nonzeros, "
        f"condensed size {dofmap.condensed_size()}"
    )
    return GlobalSystem(matrix, rhs, dofmap, config, nu, elements, asymmetry)
