from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from ..mesh.mesh import Mesh
from .quadrature import QuadRule, cell_rule, segment_rule


class StabilizationKind(Enum):
    HHO_CLASSICAL = "hho_classical"
    RHEBERGEN_WELLS = "rhebergen_wells"
    HHO_BOXED = "hho_boxed"


class SigmaChoice(Enum):
    MATRIX = "matrix"  # full P^m(T)^{2x2}
    GRADIENT = "gradient"  # gradients of the reconstruction space


class ClosureCase(Enum):
    CELL_AVERAGE = "cell_average"  # mean of r_T v equals mean of v_T
    FACE_AVERAGE = "face_average"  # mean of r_T v from the face averages of v_F


@dataclass(frozen=True)
class FaceGeometry:
    """One face seen from a cell, in the cell's local frame (origin at x_T)."""

    a: NDArray[np.float64]
    b: NDArray[np.float64]
    length: float
    midpoint: NDArray[np.float64]
    tangent: NDArray[np.float64]  # t_F, fixed by the owner's orientation
    normal: NDArray[np.float64]  # n_F
    sign: int  # sigma_TF

    @property
    def outward_normal(self) -> NDArray[np.float64]:
        return self.sign * self.normal


class CellGeometry:
    """
    Geometry of one cell in a local frame centred at its centroid.

    Local computations only ever see local coordinates; ``to_global`` maps quadrature points
    back when an external field (forcing, exact solution) has to be evaluated.
    """

    def __init__(self, origin: NDArray[np.float64], vertices: NDArray[np.float64], signs: NDArray[np.int64]):
        self.origin = np.asarray(origin, dtype=float)
        self.vertices = np.asarray(vertices, dtype=float)
        self.n_faces = len(self.vertices)
        self.area = 0.5 * float(
            np.dot(self.vertices[:, 0], np.roll(self.vertices[:, 1], -1))
            - np.dot(np.roll(self.vertices[:, 0], -1), self.vertices[:, 1])
        )
        diffs = self.vertices[:, None, :] - self.vertices[None, :, :]
        self.diameter = float(np.sqrt((diffs**2).sum(axis=-1)).max())
        self.center = np.zeros(2)

        faces = []
        for i in range(self.n_faces):
            p, q = self.vertices[i], self.vertices[(i + 1) % self.n_faces]
            sign = int(signs[i])
            a, b = (p, q) if sign > 0 else (q, p)
            length = float(np.linalg.norm(b - a))
            tangent = (b - a) / length
            faces.append(
                FaceGeometry(
                    a=a,
                    b=b,
                    length=length,
                    midpoint=0.5 * (a + b),
                    tangent=tangent,
                    normal=np.array([tangent[1], -tangent[0]]),
                    sign=sign,
                )
            )
        self.faces: tuple[FaceGeometry, ...] = tuple(faces)
        self._cell_rules: dict[int, QuadRule] = {}
        self._face_rules: dict[tuple[int, int], QuadRule] = {}

    @classmethod
    def from_mesh(cls, mesh: Mesh, cell: int) -> "CellGeometry":
        geo = mesh.geometry
        origin = geo.cell_centroids[cell]
        return cls(origin, mesh.cell_vertices(cell) - origin, geo.cell_face_signs[cell])

    @property
    def is_triangle(self) -> bool:
        return self.n_faces == 3

    def is_rectangle(self, tol: float = 1e-12) -> bool:
        if self.n_faces != 4:
            return False
        edges = np.roll(self.vertices, -1, axis=0) - self.vertices
        return bool(np.all(np.min(np.abs(edges), axis=1) <= tol * self.diameter))

    def shape_key(self, decimals: int = 12) -> tuple:
        """Hashable key identifying the cell up to translation (includes face orientations)."""
        signs = tuple(f.sign for f in self.faces)
        return (tuple(np.round(self.vertices, decimals).ravel().tolist()), signs)

    def rule(self, degree: int) -> QuadRule:
        rule = self._cell_rules.get(degree)
        if rule is None:
            rule = cell_rule(self.vertices, degree, center=self.center)
            self._cell_rules[degree] = rule
        return rule

    def face_rule(self, face: int, degree: int) -> QuadRule:
        key = (face, degree)
        rule = self._face_rules.get(key)
        if rule is None:
            f = self.faces[face]
            rule = segment_rule(f.a, f.b, degree)
            self._face_rules[key] = rule
        return rule

    def to_global(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        return points + self.origin


@dataclass(frozen=True)
class LocalDofLayout:
    """Local hybrid ordering [u_T, u_F1, ..., u_Fn, p_T, p_F1, ..., p_Fn]."""

    n_ut: int
    n_uf: int
    n_pt: int
    n_pf: int
    n_faces: int
    face_ids: tuple[int, ...] = field(default=())

    @property
    def n_velocity(self) -> int:
        return self.n_ut + self.n_faces * self.n_uf

    @property
    def n_pressure(self) -> int:
        return self.n_pt + self.n_faces * self.n_pf

    @property
    def size(self) -> int:
        return self.n_velocity + self.n_pressure

    def uf_slice(self, face: int) -> slice:
        """Face-velocity block of ``face`` inside the velocity part."""
        start = self.n_ut + face * self.n_uf
        return slice(start, start + self.n_uf)

    def pf_slice(self, face: int) -> slice:
        """Face-pressure block of ``face`` inside the pressure part."""
        start = self.n_pt + face * self.n_pf
        return slice(start, start + self.n_pf)

    @property
    def ut_slice(self) -> slice:
        return slice(0, self.n_ut)

    @property
    def pt_slice(self) -> slice:
        return slice(0, self.n_pt)
