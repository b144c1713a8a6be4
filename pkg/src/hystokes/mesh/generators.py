"""
Deterministic mesh families on the unit square.

``cart`` and ``tri`` are structured; ``hexa`` (clipped honeycomb) and ``locref`` (one
quadrant refined once, with hanging nodes turned into extra polygon vertices) are
polytopal stand-ins for unstructured families.
"""

import math
from pathlib import Path

import numpy as np

from ..utils.logger import get_logger
from .mesh import Mesh, MeshParseError

logger = get_logger(__name__)

MESH_FAMILIES = ("cart", "tri", "hexa", "locref")

# First-level size of each family in convergence studies
DEFAULT_FAMILY_BASE = {"cart": 4, "tri": 2, "hexa": 4, "locref": 1}


def build_cartesian(n: int) -> Mesh:
    """n x n uniform squares, numbered row by row from the lower-left corner."""
    _check_positive(n, "n")
    xs = np.linspace(0.0, 1.0, n + 1)
    vertices = [(xs[i], xs[j]) for j in range(n + 1) for i in range(n + 1)]

    def v(i: int, j: int) -> int:
        return j * (n + 1) + i

    cells = [[v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)] for j in range(n) for i in range(n)]
    return Mesh.from_cells(vertices, cells, name=f"cart:{n}")


def build_triangular(n: int) -> Mesh:
    """n x n squares, each split along its (+1, +1) diagonal."""
    _check_positive(n, "n")
    xs = np.linspace(0.0, 1.0, n + 1)
    vertices = [(xs[i], xs[j]) for j in range(n + 1) for i in range(n + 1)]

    def v(i: int, j: int) -> int:
        return j * (n + 1) + i

    cells = []
    for j in range(n):
        for i in range(n):
            cells.append([v(i, j), v(i + 1, j), v(i + 1, j + 1)])
            cells.append([v(i, j), v(i + 1, j + 1), v(i, j + 1)])
    return Mesh.from_cells(vertices, cells, name=f"tri:{n}")


def build_locref(levels: int) -> Mesh:
    """
    Cartesian grid of 2^(levels+1) squares per side whose lower-left quadrant is refined once.

    Coarse squares touching the refined region get the midpoint of the shared side as an extra
    vertex, so every face has at most two cells.
    """
    _check_positive(levels, "levels")
    n = 2 ** (levels + 1)
    half = n // 2

    def refined(i: int, j: int) -> bool:
        return 0 <= i < half and 0 <= j < half

    # Loops in integer coordinates of the fine lattice (spacing 1 / 2n)
    loops: list[list[tuple[int, int]]] = []
    for j in range(n):
        for i in range(n):
            x0, y0 = 2 * i, 2 * j
            if refined(i, j):
                for b in range(2):
                    for a in range(2):
                        x, y = x0 + a, y0 + b
                        loops.append([(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)])
                continue
            loop = [(x0, y0)]
            if refined(i, j - 1):
                loop.append((x0 + 1, y0))
            loop.append((x0 + 2, y0))
            if refined(i + 1, j):
                loop.append((x0 + 2, y0 + 1))
            loop.append((x0 + 2, y0 + 2))
            if refined(i, j + 1):
                loop.append((x0 + 1, y0 + 2))
            loop.append((x0, y0 + 2))
            if refined(i - 1, j):
                loop.append((x0, y0 + 1))
            loops.append(loop)

    return _mesh_from_lattice(loops, (2 * n, 2 * n), name=f"locref:{levels}")


def build_hexagonal(n: int) -> Mesh:
    """
    Honeycomb of pointy-top hexagons, n columns across, clipped to the unit square.

    Rows are spaced 1/m with m = round(2n / sqrt(3)), so the hexagons are slightly stretched
    vertically to fit the square exactly. Hexagon vertices live on a lattice of spacing
    (1/2n, 1/3m), where clipping against the square is exact.
    """
    _check_positive(n, "n")
    m = max(1, round(2 * n / math.sqrt(3)))
    xmax, ymax = 2 * n, 3 * m

    loops: list[list[tuple[int, int]]] = []
    for r in range(-1, m + 2):
        for c in range(-1, n + 2):
            cx, cy = 2 * c + (r % 2), 3 * r
            hexagon = [
                (cx, cy - 2),
                (cx + 1, cy - 1),
                (cx + 1, cy + 1),
                (cx, cy + 2),
                (cx - 1, cy + 1),
                (cx - 1, cy - 1),
            ]
            clipped = _clip_to_box(hexagon, xmax, ymax)
            if clipped:
                loops.append(clipped)

    return _mesh_from_lattice(loops, (xmax, ymax), name=f"hexa:{n}")


def _clip_to_box(polygon: list[tuple[int, int]], xmax: int, ymax: int) -> list[tuple[int, int]]:
    """Sutherland-Hodgman clipping against [0, xmax] x [0, ymax] on integer coordinates."""
    planes = [(0, 1, 0), (0, -1, xmax), (1, 1, 0), (1, -1, ymax)]  # (axis, sign, offset): sign*(p[axis]-offset) >= 0
    points: list[tuple[float, float]] = [(float(x), float(y)) for x, y in polygon]
    for axis, sign, offset in planes:
        if not points:
            break
        result: list[tuple[float, float]] = []
        for idx, current in enumerate(points):
            previous = points[idx - 1]
            cur_in = sign * (current[axis] - offset) >= 0
            prev_in = sign * (previous[axis] - offset) >= 0
            if cur_in:
                if not prev_in:
                    result.append(_intersect(previous, current, axis, offset))
                result.append(current)
            elif prev_in:
                result.append(_intersect(previous, current, axis, offset))
        points = result

    lattice = [(round(x), round(y)) for x, y in points]
    deduped: list[tuple[int, int]] = []
    for p in lattice:
        if not deduped or deduped[-1] != p:
            deduped.append(p)
    while len(deduped) > 1 and deduped[0] == deduped[-1]:
        deduped.pop()
    if len(deduped) < 3 or _lattice_area2(deduped) <= 0:
        return []
    return deduped


def _intersect(p: tuple[float, float], q: tuple[float, float], axis: int, offset: float) -> tuple[float, float]:
    t = (offset - p[axis]) / (q[axis] - p[axis])
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def _lattice_area2(loop: list[tuple[int, int]]) -> int:
    return sum(x0 * y1 - x1 * y0 for (x0, y0), (x1, y1) in zip(loop, loop[1:] + loop[:1], strict=True))


def _mesh_from_lattice(loops: list[list[tuple[int, int]]], extent: tuple[int, int], name: str) -> Mesh:
    points = sorted({p for loop in loops for p in loop}, key=lambda p: (p[1], p[0]))
    index = {p: i for i, p in enumerate(points)}
    vertices = np.array([(x / extent[0], y / extent[1]) for x, y in points], dtype=float)
    cells = [[index[p] for p in loop] for loop in loops]
    return Mesh.from_cells(vertices, cells, name=name)


def _check_positive(value: int, name: str) -> None:
    if int(value) != value or value < 1:
        error_msg = f"{name} must be a positive integer, got {value}"
        raise ValueError(error_msg)


_BUILDERS = {
    "cart": build_cartesian,
    "tri": build_triangular,
    "hexa": build_hexagonal,
    "locref": build_locref,
}


def build_mesh(spec: str) -> Mesh:
    """
    Build a mesh from a ``family:n`` or ``file:path`` specification.

    Examples: ``cart:10``, ``tri:4``, ``hexa:6``, ``locref:2``, ``file:mesh.json``.
    """
    family, sep, arg = spec.partition(":")
    if not sep or not arg:
        raise MeshParseError(spec, "expected 'family:n' or 'file:path'")
    if family == "file":
        from .io import read_mesh

        return read_mesh(Path(arg))
    builder = _BUILDERS.get(family)
    if builder is None:
        raise MeshParseError(spec, f"unknown mesh family '{family}' (expected one of {', '.join(MESH_FAMILIES)})")
    try:
        size = int(arg)
    except ValueError as e:
        raise MeshParseError(spec, f"size '{arg}' is not an integer") from e
    mesh = builder(size)
    logger.info(f"Built mesh {mesh.name}: {mesh.n_cells} cells, {mesh.n_faces} faces, h={mesh.h:.6f}")
    return mesh


def family_mesh(family: str, level: int) -> Mesh:
    """
    Level ``level`` (0-based) of a refinement family.

    ``family`` is a family name optionally followed by the first-level size, e.g. ``cart:10``
    gives cart:10, cart:20, cart:40, ...; ``locref`` levels count up instead of doubling.
    """
    name, _, base_arg = family.partition(":")
    if name not in _BUILDERS:
        raise MeshParseError(family, f"unknown mesh family '{name}' (expected one of {', '.join(MESH_FAMILIES)})")
    base = int(base_arg) if base_arg else DEFAULT_FAMILY_BASE[name]
    size = base + level if name == "locref" else base * 2**level
    return build_mesh(f"{name}:{size}")
