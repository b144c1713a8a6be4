"""
Tests for mesh construction, geometry and validation.
Run with: uv run pytest tests/mesh/test_mesh.py -v
"""

import numpy as np
import pytest

from hystokes.mesh.generators import (
    build_cartesian,
    build_hexagonal,
    build_locref,
    build_mesh,
    build_triangular,
    family_mesh,
)
from hystokes.mesh.io import read_mesh, write_mesh
from hystokes.mesh.mesh import (
    POLYTOPAL,
    RECTANGULAR,
    SIMPLICIAL,
    DegenerateCellError,
    Mesh,
    MeshOrientationError,
    MeshParseError,
    MeshTopologyError,
    validate,
)


@pytest.fixture
def unit_square():
    return Mesh.from_cells([(0, 0), (1, 0), (1, 1), (0, 1)], [[0, 1, 2, 3]], name="square")


class TestGenerators:
    def test_cartesian_counts(self):
        mesh = build_cartesian(10)
        assert mesh.n_cells == 100
        assert mesh.n_faces == 220
        assert mesh.n_boundary_faces == 40
        assert mesh.h == pytest.approx(0.141421, abs=1e-6)
        assert mesh.tag == RECTANGULAR

    def test_single_cartesian_cell(self):
        mesh = build_cartesian(1)
        assert mesh.n_cells == 1
        assert mesh.n_faces == 4
        assert mesh.n_boundary_faces == 4

    def test_triangular_counts(self):
        mesh = build_triangular(4)
        assert mesh.n_cells == 32
        assert mesh.n_faces == 56
        assert len(mesh.internal_faces) == 40
        assert mesh.tag == SIMPLICIAL
        assert build_triangular(2).n_cells == 8
        assert build_triangular(2).n_faces == 16

    @pytest.mark.parametrize("spec", ["cart:3", "tri:4", "hexa:2", "hexa:4", "locref:1", "locref:2"])
    def test_generated_meshes_validate(self, spec):
        mesh = build_mesh(spec)
        assert validate(mesh) == []
        assert mesh.geometry.cell_areas.sum() == pytest.approx(1.0, abs=1e-12)

    def test_hexagonal_is_polytopal(self):
        assert build_hexagonal(2).tag == POLYTOPAL

    def test_locref_has_two_cell_sizes(self):
        mesh = build_locref(1)
        sizes = set(np.round(mesh.geometry.cell_areas, 12))
        assert len(sizes) >= 2
        # every face borders at most two cells
        assert mesh.face_cells.shape[1] == 2

    def test_generators_are_deterministic(self):
        a, b = build_hexagonal(3), build_hexagonal(3)
        np.testing.assert_array_equal(a.vertices, b.vertices)

    def test_family_levels_double(self):
        assert family_mesh("cart:10", 1).n_cells == 400
        assert family_mesh("tri", 0).n_cells == build_triangular(2).n_cells

    @pytest.mark.parametrize("spec", ["cart", "cart:", "disk:4", "cart:x"])
    def test_bad_specs(self, spec):
        with pytest.raises(MeshParseError):
            build_mesh(spec)

    def test_non_positive_size(self):
        with pytest.raises(ValueError):
            build_cartesian(0)


class TestGeometry:
    def test_unit_square(self, unit_square):
        geo = unit_square.geometry
        assert geo.cell_diameters[0] == pytest.approx(np.sqrt(2))
        assert geo.cell_areas[0] == pytest.approx(1.0)
        np.testing.assert_allclose(geo.cell_centroids[0], [0.5, 0.5])

    def test_reference_triangle_hypotenuse(self):
        mesh = Mesh.from_cells([(0, 0), (1, 0), (0, 1)], [[0, 1, 2]])
        geo = mesh.geometry
        assert geo.cell_areas[0] == pytest.approx(0.5)
        local = next(i for i, f in enumerate(mesh.cell_faces[0]) if set(mesh.faces[f].tolist()) == {1, 2})
        normal = geo.outward_normal(0, local, mesh.cell_faces[0][local])
        np.testing.assert_allclose(normal, [1 / np.sqrt(2), 1 / np.sqrt(2)])

    def test_closure_of_normals(self):
        mesh = build_hexagonal(3)
        geo = mesh.geometry
        for t, faces in enumerate(mesh.cell_faces):
            normals = geo.cell_face_signs[t][:, None] * geo.face_normals[faces]
            closure = (geo.face_lengths[faces, None] * normals).sum(axis=0)
            assert np.linalg.norm(closure) <= 1e-12 * geo.cell_diameters[t]

    def test_internal_face_signs_are_opposite(self):
        mesh = build_cartesian(3)
        geo = mesh.geometry
        for f in mesh.internal_faces:
            owner, neighbour = mesh.face_cells[f]
            s1 = geo.cell_face_signs[owner][list(mesh.cell_faces[owner]).index(f)]
            s2 = geo.cell_face_signs[neighbour][list(mesh.cell_faces[neighbour]).index(f)]
            assert s1 == -s2


class TestConstructionErrors:
    def test_clockwise_cell(self):
        with pytest.raises(MeshOrientationError):
            Mesh.from_cells([(0, 0), (1, 0), (1, 1), (0, 1)], [[0, 3, 2, 1]])

    def test_degenerate_cell(self):
        with pytest.raises(DegenerateCellError):
            Mesh.from_cells([(0, 0), (1, 0), (1, 1e-16)], [[0, 1, 2]])

    def test_face_shared_by_three_cells(self):
        vertices = [(0, 0), (1, 0), (0.5, 1), (0.5, -1), (0.5, 0.5)]
        with pytest.raises(MeshTopologyError):
            Mesh.from_cells(vertices, [[0, 1, 2], [1, 0, 3], [0, 1, 4]])

    def test_missing_vertex(self):
        with pytest.raises(MeshTopologyError):
            Mesh.from_cells([(0, 0), (1, 0), (0, 1)], [[0, 1, 5]])

    def test_validate_reports_area_gap(self):
        mesh = Mesh.from_cells([(0, 0), (1, 0), (0, 1)], [[0, 1, 2]])
        problems = validate(mesh)
        assert any("areas" in p for p in problems)


class TestMeshIO:
    def test_round_trip(self, tmp_path):
        mesh = build_hexagonal(2)
        path = tmp_path / "hexa.json"
        write_mesh(mesh, path)
        again = read_mesh(path)
        np.testing.assert_array_equal(again.vertices, mesh.vertices)
        assert [c.tolist() for c in again.cells] == [c.tolist() for c in mesh.cells]
        np.testing.assert_array_equal(again.faces, mesh.faces)

    def test_single_cell_file(self, tmp_path):
        path = tmp_path / "square.json"
        path.write_text('{"vertices": [[0,0],[1,0],[1,1],[0,1]], "cells": [[0,1,2,3]]}', encoding="utf-8")
        mesh = build_mesh(f"file:{path}")
        assert mesh.n_cells == 1
        assert mesh.n_boundary_faces == 4

    def test_clockwise_file(self, tmp_path):
        path = tmp_path / "cw.json"
        path.write_text('{"vertices": [[0,0],[1,0],[1,1],[0,1]], "cells": [[0,3,2,1]]}', encoding="utf-8")
        with pytest.raises(MeshOrientationError):
            read_mesh(path)

    @pytest.mark.parametrize("text", ["not json", '{"cells": []}', '{"vertices": [[0]], "cells": []}'])
    def test_malformed_files(self, tmp_path, text):
        path = tmp_path / "bad.json"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(MeshParseError):
            read_mesh(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MeshParseError):
            read_mesh(tmp_path / "nope.json")
