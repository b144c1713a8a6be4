"""
Tests for the local reconstruction operators and local forms.
Run with: uv run pytest tests/core/test_localops.py -v
"""

import numpy as np
import pytest

from hystokes.core.forms import (
    Stabilization,
    StabilizationError,
    coupling_form,
    coupling_form_bis,
    pressure_stab_form,
    viscous_form,
)
from hystokes.core.interpolators import FaceProjector, L2Projector
from hystokes.core.localops import build_operators, vgrad_op_divergence_form
from hystokes.core.types import CellGeometry, StabilizationKind
from hystokes.mesh.mesh import Mesh
from hystokes.scheme.methods import make_config

TRIANGLE = [(0.1, 0.05), (0.85, 0.2), (0.35, 0.9)]
RECTANGLE = [(0.1, 0.2), (0.8, 0.2), (0.8, 0.6), (0.1, 0.6)]
PENTAGON = [(0.1, 0.1), (0.7, 0.05), (0.9, 0.5), (0.5, 0.85), (0.05, 0.6)]

CASES = [
    ("botti_massa", 0, TRIANGLE),
    ("botti_massa", 1, TRIANGLE),
    ("rhebergen_wells", 1, TRIANGLE),
    ("rtn_new", 0, TRIANGLE),
    ("rtn_new", 1, TRIANGLE),
    ("bdfm_new", 1, RECTANGLE),
    ("polytopal", 0, PENTAGON),
    ("polytopal", 2, PENTAGON),
]


def single_cell(vertices):
    return CellGeometry.from_mesh(Mesh.from_cells(vertices, [list(range(len(vertices)))]), 0)


def local_setup(method, k, vertices):
    cell = single_cell(vertices)
    config = make_config(method, k)
    spaces = config.local_spaces(cell)
    return config, spaces, build_operators(spaces)


def constant_pressure(spaces, value):
    """Local hybrid coefficients of the constant pressure ``value``."""
    def field(points):
        return np.full(len(points), value)

    layout = spaces.layout
    q = np.zeros(layout.n_pressure)
    q[layout.pt_slice] = L2Projector(spaces.cell, spaces.pt).apply(field, 0)
    for f, basis in enumerate(spaces.pf_bases):
        q[layout.pf_slice(f)] = FaceProjector(spaces.cell, f, basis).apply(field, 0)
    return q


def constant_velocity(spaces, value):
    def field(points):
        return np.tile(value, (len(points), 1))

    layout = spaces.layout
    v = np.zeros(layout.n_velocity)
    v[layout.ut_slice] = L2Projector(spaces.cell, spaces.ut).apply(field, 0)
    for f, basis in enumerate(spaces.uf_bases):
        v[layout.uf_slice(f)] = FaceProjector(spaces.cell, f, basis).apply(field, 0)
    return v


@pytest.mark.parametrize(("method", "k", "vertices"), CASES)
class TestOperators:
    def test_shapes(self, method, k, vertices):
        _, spaces, ops = local_setup(method, k, vertices)
        layout = spaces.layout
        assert ops.div.shape == (spaces.pt.dim, layout.n_velocity)
        assert ops.pgrad.shape == (spaces.ut.dim, layout.n_pressure)
        assert ops.vgrad.shape == (spaces.sigma.dim, layout.n_velocity)
        assert ops.recon.shape == (spaces.w.dim, layout.n_velocity)

    def test_gradient_of_constant_pressure_vanishes(self, method, k, vertices):
        _, spaces, ops = local_setup(method, k, vertices)
        np.testing.assert_allclose(ops.pgrad @ constant_pressure(spaces, 2.5), 0.0, atol=1e-11)

    def test_constant_velocity(self, method, k, vertices):
        """Constants have zero divergence and zero gradient, and are reconstructed exactly."""
        _, spaces, ops = local_setup(method, k, vertices)
        v = constant_velocity(spaces, np.array([1.0, -0.5]))
        np.testing.assert_allclose(ops.div @ v, 0.0, atol=1e-11)
        np.testing.assert_allclose(ops.vgrad @ v, 0.0, atol=1e-11)
        rule = spaces.rule
        values = np.einsum("i,iqc->qc", ops.recon @ v, spaces.w.values(rule.points))
        np.testing.assert_allclose(values, np.tile([1.0, -0.5], (len(rule.points), 1)), atol=1e-11)

    def test_two_gradient_definitions_agree(self, method, k, vertices):
        _, spaces, ops = local_setup(method, k, vertices)
        np.testing.assert_allclose(vgrad_op_divergence_form(spaces).matrix, ops.vgrad.matrix, atol=1e-10)

    def test_coupling_reformulation(self, method, k, vertices):
        _, spaces, ops = local_setup(method, k, vertices)
        b = coupling_form(spaces, ops)
        np.testing.assert_allclose(coupling_form_bis(spaces, ops), b, atol=1e-10 * max(np.abs(b).max(), 1.0))

    def test_viscous_form_kernel(self, method, k, vertices):
        """a_T is symmetric positive semidefinite and vanishes exactly on the constants."""
        config, spaces, ops = local_setup(method, k, vertices)
        a, _ = viscous_form(spaces, ops, config.stabilization)
        np.testing.assert_allclose(a, a.T, atol=1e-12 * np.abs(a).max())
        eigenvalues = np.linalg.eigvalsh(a)
        scale = np.abs(eigenvalues).max()
        assert eigenvalues.min() > -1e-10 * scale
        assert np.sum(eigenvalues < 1e-8 * scale) == 2

    def test_pressure_jumps_vanish_on_constants(self, method, k, vertices):
        _, spaces, _ = local_setup(method, k, vertices)
        q = constant_pressure(spaces, -1.5)
        assert abs(q @ pressure_stab_form(spaces) @ q) < 1e-12


def test_pressure_jumps_weighted_by_face_length():
    """q_T = 0 and q_F = 1 on a single face of a rectangle: d_T(q, q) = h_F |F| = |F|^2."""
    _, spaces, _ = local_setup("polytopal", 0, RECTANGLE)
    layout = spaces.layout
    d = pressure_stab_form(spaces)
    lengths = []
    for f, (basis, face) in enumerate(zip(spaces.pf_bases, spaces.cell.faces, strict=True)):
        q = np.zeros(layout.n_pressure)
        q[layout.pf_slice(f)] = FaceProjector(spaces.cell, f, basis).apply(lambda points: np.ones(len(points)), 0)
        assert q @ d @ q == pytest.approx(face.length**2, rel=1e-12)
        lengths.append(face.length)
    assert sorted(lengths) == pytest.approx([0.4, 0.4, 0.7, 0.7])


def test_rw_stabilization_needs_positive_eta():
    with pytest.raises(StabilizationError):
        Stabilization(StabilizationKind.RHEBERGEN_WELLS, eta=0.0)
    with pytest.raises(StabilizationError):
        Stabilization(StabilizationKind.RHEBERGEN_WELLS)
