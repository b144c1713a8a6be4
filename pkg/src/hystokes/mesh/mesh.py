"""
Polygonal mesh data model.

A mesh is a list of vertices and a list of counter-clockwise vertex loops. Faces (edges) are
derived from the loops: face ``i`` of a cell joins loop vertices ``i`` and ``i+1``. Each face
stores its owner (the lowest-index cell containing it) and its neighbour (``-1`` on the
boundary); the fixed face normal ``n_F`` points out of the owner, hence out of the domain on
boundary faces.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray

from ..utils.logger import get_logger

logger = get_logger(__name__)

AREA_TOLERANCE = 1e-12
DEGENERATE_AREA = 1e-14

SIMPLICIAL = "simplicial"
RECTANGULAR = "rectangular"
POLYTOPAL = "polytopal"


class MeshError(ValueError):
    """Base class for invalid meshes."""


class MeshParseError(MeshError):
    """Raised when a mesh file cannot be decoded."""

    def __init__(self, source: str, reason: str):
        super().__init__(f"Cannot parse mesh from {source}: {reason}")


class MeshTopologyError(MeshError):
    """Raised when a face is shared by more than two cells or a loop is not simple."""

    def __init__(self, reason: str):
        super().__init__(f"Invalid mesh topology: {reason}")


class MeshOrientationError(MeshError):
    """Raised when a cell loop is not counter-clockwise."""

    def __init__(self, cell: int, area: float):
        super().__init__(f"Cell {cell} is not counter-clockwise (signed area {area:.3e})")


class DegenerateCellError(MeshError):
    """Raised when a cell has (numerically) zero area."""

    def __init__(self, cell: int, area: float):
        super().__init__(f"Cell {cell} is degenerate (area {area:.3e})")


def signed_area(points: NDArray[np.float64]) -> float:
    """Shoelace formula; positive for counter-clockwise loops."""
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(points: NDArray[np.float64]) -> NDArray[np.float64]:
    x, y = points[:, 0], points[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return np.array([cx, cy])


@dataclass(frozen=True)
class MeshGeometry:
    """Geometric quantities of a mesh; all arrays are read-only."""

    cell_diameters: NDArray[np.float64]
    cell_areas: NDArray[np.float64]
    cell_centroids: NDArray[np.float64]
    face_lengths: NDArray[np.float64]
    face_midpoints: NDArray[np.float64]
    face_tangents: NDArray[np.float64]
    face_normals: NDArray[np.float64]
    cell_face_signs: tuple[NDArray[np.int64], ...]

    def outward_normal(self, cell: int, local_face: int, face: int) -> NDArray[np.float64]:
        """n_TF for face ``face`` seen from ``cell`` (``local_face`` is its position in the loop)."""
        return self.cell_face_signs[cell][local_face] * self.face_normals[face]


@dataclass(frozen=True)
class Mesh:
    vertices: NDArray[np.float64]
    cells: tuple[NDArray[np.int64], ...]
    faces: NDArray[np.int64]
    face_cells: NDArray[np.int64]
    cell_faces: tuple[NDArray[np.int64], ...]
    name: str = "mesh"
    _tag: str | None = field(default=None, repr=False)

    @classmethod
    def from_cells(
        cls,
        vertices: Sequence[Sequence[float]] | NDArray[np.float64],
        cells: Sequence[Sequence[int]],
        name: str = "mesh",
    ) -> "Mesh":
        """Build a mesh from vertex coordinates and counter-clockwise vertex loops."""
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise MeshTopologyError(f"vertices must have shape (n, 2), got {verts.shape}")

        loops = tuple(np.asarray(c, dtype=np.int64) for c in cells)
        face_index: dict[tuple[int, int], int] = {}
        face_vertices: list[tuple[int, int]] = []
        face_cells: list[list[int]] = []
        cell_faces: list[NDArray[np.int64]] = []

        for t, loop in enumerate(loops):
            if len(loop) < 3:
                raise MeshTopologyError(f"cell {t} has fewer than 3 vertices")
            if len(set(loop.tolist())) != len(loop):
                raise MeshTopologyError(f"cell {t} repeats a vertex")
            if loop.min() < 0 or loop.max() >= len(verts):
                raise MeshTopologyError(f"cell {t} references a missing vertex")
            area = signed_area(verts[loop])
            if area < 0:
                raise MeshOrientationError(t, area)
            if area < DEGENERATE_AREA:
                raise DegenerateCellError(t, area)

            local = []
            for i in range(len(loop)):
                a, b = int(loop[i]), int(loop[(i + 1) % len(loop)])
                key = (min(a, b), max(a, b))
                f = face_index.get(key)
                if f is None:
                    f = len(face_vertices)
                    face_index[key] = f
                    face_vertices.append((a, b))
                    face_cells.append([t, -1])
                else:
                    if face_cells[f][1] != -1:
                        raise MeshTopologyError(f"face {key} shared by more than two cells")
                    if face_vertices[f] == (a, b):
                        raise MeshTopologyError(f"face {key} traversed twice in the same direction")
                    face_cells[f][1] = t
                local.append(f)
            cell_faces.append(np.asarray(local, dtype=np.int64))

        mesh = cls(
            vertices=verts,
            cells=loops,
            faces=np.asarray(face_vertices, dtype=np.int64).reshape(-1, 2),
            face_cells=np.asarray(face_cells, dtype=np.int64).reshape(-1, 2),
            cell_faces=tuple(cell_faces),
            name=name,
        )
        for array in (mesh.vertices, mesh.faces, mesh.face_cells):
            array.setflags(write=False)
        logger.debug(f"Built mesh '{name}': {mesh.n_cells} cells, {mesh.n_faces} faces")
        return mesh

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def boundary_faces(self) -> NDArray[np.bool_]:
        return self.face_cells[:, 1] < 0

    @cached_property
    def internal_faces(self) -> NDArray[np.int64]:
        return np.flatnonzero(~self.boundary_faces)

    @property
    def n_boundary_faces(self) -> int:
        return int(self.boundary_faces.sum())

    @cached_property
    def tag(self) -> str:
        """simplicial, rectangular (axis-aligned) or polytopal."""
        if self._tag is not None:
            return self._tag
        if all(len(c) == 3 for c in self.cells):
            return SIMPLICIAL
        if all(len(c) == 4 and _is_axis_aligned_rectangle(self.vertices[c]) for c in self.cells):
            return RECTANGULAR
        return POLYTOPAL

    @cached_property
    def geometry(self) -> MeshGeometry:
        return compute_geometry(self)

    @property
    def h(self) -> float:
        """Mesh size: largest cell diameter."""
        return float(self.geometry.cell_diameters.max())

    def cell_vertices(self, cell: int) -> NDArray[np.float64]:
        return self.vertices[self.cells[cell]]


def _is_axis_aligned_rectangle(points: NDArray[np.float64], tol: float = 1e-12) -> bool:
    edges = np.roll(points, -1, axis=0) - points
    scale = np.abs(edges).max()
    return bool(np.all(np.min(np.abs(edges), axis=1) <= tol * scale))


def compute_geometry(mesh: Mesh) -> MeshGeometry:
    """Cell diameters, areas and centroids; face lengths, midpoints, tangents and normals."""
    nc = mesh.n_cells
    diameters = np.empty(nc)
    areas = np.empty(nc)
    centroids = np.empty((nc, 2))
    for t, loop in enumerate(mesh.cells):
        pts = mesh.vertices[loop]
        area = signed_area(pts)
        if area < DEGENERATE_AREA:
            raise DegenerateCellError(t, area)
        areas[t] = area
        centroids[t] = polygon_centroid(pts)
        diffs = pts[:, None, :] - pts[None, :, :]
        diameters[t] = np.sqrt((diffs**2).sum(axis=-1)).max()

    a = mesh.vertices[mesh.faces[:, 0]]
    b = mesh.vertices[mesh.faces[:, 1]]
    lengths = np.linalg.norm(b - a, axis=1)
    tangents = (b - a) / lengths[:, None]
    # a -> b follows the owner's counter-clockwise loop, so the outward normal is the tangent rotated by -pi/2
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]])

    signs = tuple(
        np.where(mesh.face_cells[faces, 0] == t, 1, -1).astype(np.int64) for t, faces in enumerate(mesh.cell_faces)
    )
    geometry = MeshGeometry(
        cell_diameters=diameters,
        cell_areas=areas,
        cell_centroids=centroids,
        face_lengths=lengths,
        face_midpoints=0.5 * (a + b),
        face_tangents=tangents,
        face_normals=normals,
        cell_face_signs=signs,
    )
    for array in (diameters, areas, centroids, lengths, tangents, normals, geometry.face_midpoints):
        array.setflags(write=False)
    return geometry


def validate(mesh: Mesh, domain_area: float = 1.0) -> list[str]:
    """
    Check the mesh invariants and return the list of violations (empty when valid).

    Face sharing and orientation are enforced at construction; this re-checks outward normals,
    the per-cell closure sum |F| n_TF = 0, sign consistency across internal faces, and the area
    covering of the domain.
    """
    problems: list[str] = []
    geo = mesh.geometry
    for t, faces in enumerate(mesh.cell_faces):
        signs = geo.cell_face_signs[t]
        normals = signs[:, None] * geo.face_normals[faces]
        outward = np.einsum("ij,ij->i", geo.face_midpoints[faces] - geo.cell_centroids[t], normals)
        if np.any(outward <= 0):
            problems.append(f"cell {t}: normal not pointing outwards")
        closure = (geo.face_lengths[faces, None] * normals).sum(axis=0)
        if np.linalg.norm(closure) > 1e-12 * geo.cell_diameters[t]:
            problems.append(f"cell {t}: sum |F| n_TF = {closure} does not vanish")

    for f in mesh.internal_faces:
        owner, neighbour = mesh.face_cells[f]
        s_owner = geo.cell_face_signs[owner][list(mesh.cell_faces[owner]).index(f)]
        s_neigh = geo.cell_face_signs[neighbour][list(mesh.cell_faces[neighbour]).index(f)]
        if s_owner != -s_neigh:
            problems.append(f"face {f}: inconsistent orientation signs")

    total = float(geo.cell_areas.sum())
    if abs(total - domain_area) > AREA_TOLERANCE * max(1.0, domain_area):
        problems.append(f"cell areas sum to {total:.16g}, expected {domain_area:.16g}")

    for problem in problems:
        logger.debug(f"Mesh '{mesh.name}' validation: {problem}")
    return problems
