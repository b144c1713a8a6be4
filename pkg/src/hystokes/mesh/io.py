import json
from pathlib import Path

import numpy as np

from ..utils.logger import get_logger
from .mesh import Mesh, MeshParseError

logger = get_logger(__name__)


def read_mesh(path: Path) -> Mesh:
    """Read a ``{"vertices": [[x, y], ...], "cells": [[i0, i1, ...], ...]}`` JSON mesh."""
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise MeshParseError(str(path), str(e)) from e
    except json.JSONDecodeError as e:
        raise MeshParseError(str(path), f"invalid JSON ({e.msg} at line {e.lineno})") from e

    if not isinstance(data, dict) or "vertices" not in data or "cells" not in data:
        raise MeshParseError(str(path), "expected an object with 'vertices' and 'cells'")

    try:
        vertices = np.asarray(data["vertices"], dtype=float)
        cells = [[int(i) for i in cell] for cell in data["cells"]]
    except (TypeError, ValueError) as e:
        raise MeshParseError(str(path), f"malformed vertex or cell entry ({e})") from e
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshParseError(str(path), f"vertices must be [x, y] pairs, got shape {vertices.shape}")

    mesh = Mesh.from_cells(vertices, cells, name=f"file:{path}")
    logger.info(f"Read mesh from {path}: {mesh.n_cells} cells, {mesh.n_faces} faces")
    return mesh


def write_mesh(mesh: Mesh, path: Path) -> None:
    """Write ``mesh`` in the JSON mesh format, coordinates with 17 significant digits."""
    vertex_lines = ",\n    ".join(f"[{x:.17g}, {y:.17g}]" for x, y in mesh.vertices)
    cell_lines = ",\n    ".join(json.dumps([int(i) for i in cell]) for cell in mesh.cells)
    text = f'{{\n  "vertices": [\n    {vertex_lines}\n  ],\n  "cells": [\n    {cell_lines}\n  ]\n}}\n'

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.debug(f"Wrote mesh {mesh.name} to {path}")
