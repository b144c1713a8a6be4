"""
Tests for static condensation, the direct solve and the solve pipeline.
Run with: uv run pytest tests/scheme/test_solver.py -v
"""

import json

import numpy as np
import pytest

from hystokes.analysis.norms import cell_divergence_norms, exact_h1_norm
from hystokes.analysis.problems import manufactured, zero_problem
from hystokes.mesh.generators import build_mesh
from hystokes.scheme.assembly import assemble
from hystokes.scheme.pipeline import HyStokesPipeline
from hystokes.scheme import solver as solver_module
from hystokes.scheme.solver import CondensationError, ResidualError, condense, relative_residual, solve
from hystokes.utils.config import HyStokesConfig

# Reference errors on cart:10 (h = 0.141421): e_1h, e_grad_rec, e_L2, e_rec, e_p
CART10_REFERENCE = {
    0: (681, (7.431549e-02, 5.434746e-02, 8.757928e-03, 6.594299e-03, 6.380900e-02)),
    1: (1261, (2.231652e-02, 2.071433e-03, 5.267229e-04, 3.493709e-05, 7.189385e-04)),
    2: (1841, (2.306263e-03, 2.086652e-04, 2.840043e-05, 2.186706e-06, 1.069296e-04)),
}


@pytest.fixture
def pipeline(tmp_path):
    return HyStokesPipeline(settings=HyStokesConfig(), config_dir=tmp_path)


def test_polytopal_cart10_k0(pipeline):
    mesh = build_mesh("cart:10")
    result = pipeline.run(mesh, pipeline.configure("polytopal", 0, mesh))
    assert result.solution.solved_size == 681
    assert result.report.e_1h == pytest.approx(7.431549e-02, rel=1e-3)
    assert result.report.e_p == pytest.approx(6.380900e-02, rel=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize("k", [0, 1, 2])
def test_polytopal_cart10_reference_errors(pipeline, k):
    mesh = build_mesh("cart:10")
    result = pipeline.run(mesh, pipeline.configure("polytopal", k, mesh))
    size, errors = CART10_REFERENCE[k]
    assert result.report.size == size
    np.testing.assert_allclose(result.report.errors(), errors, rtol=1e-3)


@pytest.mark.parametrize(
    ("method", "k", "spec"), [("bm", 0, "tri:2"), ("polytopal", 1, "hexa:2"), ("bdfm", 1, "cart:2")]
)
def test_condensed_and_full_solutions_agree(pipeline, method, k, spec):
    mesh = build_mesh(spec)
    config = pipeline.configure(method, k, mesh)
    full = pipeline.run(mesh, config, condense_system=False, compute_errors=False)
    condensed = pipeline.run(mesh, config, condense_system=True, compute_errors=False)
    assert condensed.solution.solved_size < full.solution.solved_size
    np.testing.assert_allclose(condensed.solution.coefficients, full.solution.coefficients, atol=1e-9)


@pytest.mark.parametrize(("method", "k", "spec"), [("bm", 1, "tri:2"), ("rw", 1, "tri:2"), ("polytopal", 0, "cart:2")])
def test_zero_forcing_gives_zero_solution(pipeline, method, k, spec):
    mesh = build_mesh(spec)
    result = pipeline.run(mesh, pipeline.configure(method, k, mesh), zero_problem(), compute_errors=False)
    assert np.abs(result.solution.coefficients).max() <= 1e-14


@pytest.mark.parametrize(
    ("method", "k", "spec"), [("bm", 0, "tri:2"), ("rw", 1, "tri:2"), ("rtn", 0, "tri:2"), ("bdfm", 1, "cart:2")]
)
def test_divergence_free_velocities(pipeline, method, k, spec):
    mesh = build_mesh(spec)
    problem = manufactured(1.0)
    result = pipeline.run(mesh, pipeline.configure(method, k, mesh), problem, compute_errors=False)
    divergence = cell_divergence_norms(result.elements, result.solution.dofmap, result.solution.coefficients)
    assert divergence.max() <= 1e-10 * exact_h1_norm(result.elements, problem.u, problem.grad_u)


def test_condense_twice(pipeline):
    mesh = build_mesh("cart:2")
    config = pipeline.configure("polytopal", 0, mesh)
    system = assemble(mesh, config, 1.0, manufactured(1.0).f)
    with pytest.raises(CondensationError):
        condense(condense(system))


def test_residual_is_small(pipeline):
    mesh = build_mesh("tri:2")
    config = pipeline.configure("bm", 1, mesh)
    system = assemble(mesh, config, 1.0, manufactured(1.0).f)
    assert solve(condense(system)).residual < 1e-10


def test_solution_json(pipeline, tmp_path):
    mesh = build_mesh("cart:2")
    result = pipeline.run(mesh, pipeline.configure("polytopal", 0, mesh))
    path = tmp_path / "out" / "solution.json"
    result.solution.save(path, {"command": "solve", "seed": 42})
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["manifest"]["command"] == "solve"
    assert data["dofmap"]["size"] == result.solution.dofmap.size
    assert data["nu"] == 1.0


def test_metrics_are_recorded(pipeline):
    mesh = build_mesh("cart:2")
    pipeline.run(mesh, pipeline.configure("polytopal", 0, mesh))
    snapshot = pipeline.metrics.get_snapshot()
    assert snapshot.total_solves == 1
    assert {"local_operators", "assembly", "condensation", "factorization", "errors"} <= set(
        snapshot.stages_performance
    )


class InaccurateFactor:
    """Stands in for a sparse LU factor whose solutions are off by a relative 1e-6."""

    def __init__(self, factor):
        self.factor = factor

    def solve(self, rhs):
        x = self.factor.solve(rhs)
        return x * (1.0 + 1e-6 * np.sign(np.sin(np.arange(len(x)))))


@pytest.fixture
def inaccurate_splu(monkeypatch):
    splu = solver_module.spla.splu
    monkeypatch.setattr(solver_module.spla, "splu", lambda matrix: InaccurateFactor(splu(matrix)))


@pytest.fixture
def condensed_system(pipeline):
    mesh = build_mesh("tri:2")
    config = pipeline.configure("bm", 1, mesh)
    return condense(assemble(mesh, config, 1.0, manufactured(1.0).f))


def test_large_residual_retries_with_dense_solve(condensed_system, inaccurate_splu):
    solution = solve(condensed_system)
    assert solution.residual < 1e-10
    x = solution.coefficients[condensed_system.condensation.skeleton]
    assert relative_residual(condensed_system.matrix, condensed_system.rhs, x) < 1e-10


def test_large_residual_without_dense_fallback_raises(condensed_system, inaccurate_splu):
    with pytest.raises(ResidualError, match="exceeds"):
        solve(condensed_system, dense_fallback_limit=0)


def test_large_residual_after_dense_solve_raises(condensed_system, inaccurate_splu, monkeypatch):
    dense = solver_module.scipy.linalg.solve
    monkeypatch.setattr(
        solver_module.scipy.linalg, "solve", lambda matrix, rhs, **kwargs: 1.001 * dense(matrix, rhs, **kwargs)
    )
    with pytest.raises(ResidualError) as excinfo:
        solve(condensed_system)
    assert excinfo.value.residual > 1e-10
