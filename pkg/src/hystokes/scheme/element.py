"""
Per-cell local data: spaces, reconstruction operators and local forms.

Local computations happen in a frame centred at the cell centroid, so cells that differ by a
translation share one ``LocalKernel``. Kernels for distinct shapes are built in a thread pool.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from ..core.forms import LocalFormSet, local_forms
from ..core.localops import LocalOperators, LocalSpaces, build_operators
from ..core.types import CellGeometry, StabilizationKind
from ..mesh.mesh import Mesh
from ..utils.logger import get_logger
from .methods import MethodConfig

logger = get_logger(__name__)

COERCIVITY_TOLERANCE = 1e-11
RIGID_MODES = 2


@dataclass(frozen=True)
class LocalKernel:
    spaces: LocalSpaces
    ops: LocalOperators
    forms: LocalFormSet


@dataclass(frozen=True)
class LocalElement:
    """One mesh cell: its global face numbers, its centroid and the (shared) local kernel."""

    index: int
    faces: tuple[int, ...]
    origin: NDArray[np.float64]
    kernel: LocalKernel

    @property
    def spaces(self) -> LocalSpaces:
        return self.kernel.spaces

    @property
    def ops(self) -> LocalOperators:
        return self.kernel.ops

    @property
    def forms(self) -> LocalFormSet:
        return self.kernel.forms

    def to_global(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        return points + self.origin


def build_kernel(config: MethodConfig, cell: CellGeometry, nu: float) -> LocalKernel:
    spaces = config.local_spaces(cell)
    ops = build_operators(spaces)
    forms = local_forms(spaces, ops, config.stabilization, nu, with_pressure_stab=config.delta == 1)
    if config.stabilization.kind is StabilizationKind.RHEBERGEN_WELLS:
        check_coercivity(forms.a, config)
    return LocalKernel(spaces, ops, forms)


def build_elements(mesh: Mesh, config: MethodConfig, nu: float, threads: int = 1) -> list[LocalElement]:
    config.check_mesh(mesh)
    cells = [CellGeometry.from_mesh(mesh, t) for t in range(mesh.n_cells)]
    keys = [cell.shape_key() for cell in cells]

    representatives: dict[tuple, CellGeometry] = {}
    for key, cell in zip(keys, cells, strict=True):
        representatives.setdefault(key, cell)

    shape_keys = list(representatives)
    if threads > 1 and len(shape_keys) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            built = list(pool.map(lambda key: build_kernel(config, representatives[key], nu), shape_keys))
    else:
        built = [build_kernel(config, representatives[key], nu) for key in shape_keys]
    kernels = dict(zip(shape_keys, built, strict=True))

    logger.debug(f"{config.label()}: {len(kernels)} distinct cell shapes for {mesh.n_cells} cells")
    return [
        LocalElement(
            index=t,
            faces=tuple(int(f) for f in mesh.cell_faces[t]),
            origin=mesh.geometry.cell_centroids[t],
            kernel=kernels[key],
        )
        for t, key in enumerate(keys)
    ]


def check_coercivity(a: NDArray[np.float64], config: MethodConfig) -> bool:
    """Warn when a_T has negative eigenvalues or a kernel larger than the constants."""
    eigenvalues = np.linalg.eigvalsh(a)
    scale = max(float(np.abs(eigenvalues).max()), 1e-300)
    negative = float(eigenvalues.min()) < -COERCIVITY_TOLERANCE * scale
    kernel = int(np.sum(np.abs(eigenvalues) <= 1e3 * COERCIVITY_TOLERANCE * scale))
    if negative or kernel > RIGID_MODES:
        eta = config.stabilization.eta
        logger.warning(
            f"{config.label()}: local viscous form is not coercive with eta={eta} "
            f"(min eigenvalue {eigenvalues.min():.3e}, kernel dimension {kernel}); increase --eta"
        )
        return False
    return True
