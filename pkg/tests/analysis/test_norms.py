"""
Tests for the discrete norms and the error report.
Run with: uv run pytest tests/analysis/test_norms.py -v
"""

import numpy as np
import pytest

from hystokes.analysis.norms import (
    ERROR_COLUMNS,
    NormCalculator,
    error_report,
    gram_1h,
    interpolate_exact,
    norm_1h,
    reporting_reconstruction,
    seminorm_0h,
)
from hystokes.analysis.problems import manufactured
from hystokes.core.interpolators import FaceProjector
from hystokes.mesh.generators import build_mesh
from hystokes.scheme.assembly import DofMap
from hystokes.scheme.element import build_elements
from hystokes.scheme.methods import make_config
from hystokes.scheme.solver import HybridSolution


def setup(method, k, spec):
    mesh = build_mesh(spec)
    config = make_config(method, k, mesh=mesh)
    elements = build_elements(mesh, config, 1.0)
    layout = elements[0].spaces.layout
    dofmap = DofMap.build(mesh, layout.n_ut, layout.n_uf, layout.n_pt, layout.n_pf)
    return mesh, config, elements, dofmap


def constant(value):
    def field(points):
        return np.broadcast_to(value, (len(points),) + np.shape(value)).copy()

    return field


def test_single_square_cell():
    """v_T = (1, 0) with v_F = 0 on the four unit faces: ||v||_{1,h}^2 = 4 / sqrt(2)."""
    _, _, elements, dofmap = setup("polytopal", 0, "cart:1")
    x = np.zeros(dofmap.size)
    x[dofmap.ut(0)] = elements[0].spaces.iut.apply(constant(np.array([1.0, 0.0])), 0)
    assert norm_1h(elements, dofmap, x) ** 2 == pytest.approx(4 / np.sqrt(2), rel=1e-12)


@pytest.mark.parametrize("k", [0, 1])
def test_affine_interpolate_has_no_face_jumps(k):
    """The jump term sees v_F - pi_F v_T, so an interpolated affine field only contributes its gradient."""
    _, _, elements, _ = setup("polytopal", k, "cart:2")
    spaces = elements[0].spaces
    layout = spaces.layout
    grad = np.array([[0.3, -1.2], [2.0, 0.5]])

    def affine(points):
        return points @ grad.T + np.array([0.7, -0.1])

    v = np.zeros(layout.n_velocity)
    v[layout.ut_slice] = spaces.iut.apply(affine, 1)
    for f, basis in enumerate(spaces.uf_bases):
        v[layout.uf_slice(f)] = FaceProjector(spaces.cell, f, basis).apply(affine, 1)
    expected = spaces.cell.area * float(np.sum(grad**2))
    assert v @ gram_1h(spaces) @ v == pytest.approx(expected, rel=1e-11)


def test_zero_field():
    _, _, elements, dofmap = setup("bm", 1, "tri:2")
    assert norm_1h(elements, dofmap, np.zeros(dofmap.size)) == 0.0


def test_constant_pressure():
    _, _, elements, dofmap = setup("polytopal", 1, "hexa:2")
    x = interpolate_exact(elements, dofmap, constant(np.zeros(2)), constant(-2.0))
    calc = NormCalculator(elements, dofmap)
    assert seminorm_0h(elements, dofmap, x) == pytest.approx(0.0, abs=1e-12)
    assert calc.norm_Ph(x) == pytest.approx(2.0, rel=1e-12)


class TestNormAxioms:
    @pytest.fixture
    def fields(self):
        _, config, elements, dofmap = setup("polytopal", 1, "hexa:2")
        rng = np.random.default_rng(3)
        x = rng.uniform(-1, 1, dofmap.size)
        y = rng.uniform(-1, 1, dofmap.size)
        return config, NormCalculator(elements, dofmap), x, y

    def test_homogeneity(self, fields):
        config, calc, x, _ = fields
        for norm in (calc.norm_1h, calc.seminorm_0h, calc.norm_Ph):
            assert norm(-3.0 * x) == pytest.approx(3.0 * norm(x), rel=1e-11)
        scaled = calc.norm_nuh(-3.0 * x, 0.1, config.delta)
        assert scaled == pytest.approx(3.0 * calc.norm_nuh(x, 0.1, config.delta), rel=1e-11)

    def test_triangle_inequality(self, fields):
        _, calc, x, y = fields
        for norm in (calc.norm_1h, calc.seminorm_0h, calc.norm_Ph):
            assert norm(x + y) <= norm(x) + norm(y) + 1e-11

    def test_nuh_composition(self, fields):
        _, calc, x, _ = fields
        nu = 0.01
        expected = nu * calc.norm_1h(x) ** 2 + (calc.norm_Ph(x) ** 2 + calc.seminorm_0h(x) ** 2) / nu
        assert calc.norm_nuh(x, nu, 1) == pytest.approx(np.sqrt(expected), rel=1e-12)
        no_jumps = nu * calc.norm_1h(x) ** 2 + calc.norm_Ph(x) ** 2 / nu
        assert calc.norm_nuh(x, nu, 0) == pytest.approx(np.sqrt(no_jumps), rel=1e-12)

    def test_ph_composition(self, fields):
        _, calc, x, _ = fields
        expected = np.hypot(calc.pressure_l2(x), calc.pressure_gradient(x))
        assert calc.norm_Ph(x) == pytest.approx(expected, rel=1e-12)


def test_interpolated_solution_has_no_discrete_error():
    mesh, config, elements, dofmap = setup("bm", 1, "tri:2")
    problem = manufactured(1.0)
    x = interpolate_exact(elements, dofmap, problem.u, problem.p)
    solution = HybridSolution(x, dofmap, 1.0, 0.0, dofmap.condensed_size())
    report = error_report(solution, elements, problem, config.delta, mesh.h)
    for name in ("e_1h", "e_L2", "e_p"):
        assert getattr(report, name) <= 1e-10
    assert len(report.errors()) == len(ERROR_COLUMNS)


def test_lowest_order_reconstruction_mean_follows_faces():
    """v_T = 0 and v_F = (1, -2) on every face: the reported r_T v has mean (1, -2) at k = 0."""
    _, _, elements, _ = setup("polytopal", 0, "cart:2")
    element = elements[0]
    spaces = element.spaces
    layout = spaces.layout
    v = np.zeros(layout.n_velocity)
    for f, basis in enumerate(spaces.uf_bases):
        v[layout.uf_slice(f)] = FaceProjector(spaces.cell, f, basis).apply(constant(np.array([1.0, -2.0])), 0)
    rule = spaces.rule

    def mean(matrix):
        values = np.einsum("i,iqc->qc", matrix @ v, spaces.w.values(rule.points))
        return np.einsum("qc,q->c", values, rule.weights) / spaces.cell.area

    np.testing.assert_allclose(mean(reporting_reconstruction(element)), [1.0, -2.0], atol=1e-12)
    np.testing.assert_allclose(mean(element.ops.recon.matrix), [0.0, 0.0], atol=1e-12)


def test_higher_order_reconstruction_is_the_method_one():
    _, _, elements, _ = setup("polytopal", 1, "cart:2")
    element = elements[0]
    assert reporting_reconstruction(element) is element.ops.recon.matrix
