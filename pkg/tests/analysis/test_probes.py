"""
Tests for the stability probes.
Run with: uv run pytest tests/analysis/test_probes.py -v
"""

import numpy as np
import pandas as pd
import pytest

from hystokes.analysis.probes import (
    BOUNDED_GROWTH,
    PROBE_COLUMNS,
    ProbeReport,
    ProbeSizeError,
    inf_sup_constant,
    norm_equivalence,
    poincare_ratio,
    random_velocity_field,
    stability_probes,
)
from hystokes.analysis.problems import manufactured
from hystokes.mesh.generators import build_mesh
from hystokes.scheme.pipeline import HyStokesPipeline
from hystokes.utils.config import HyStokesConfig


@pytest.fixture
def pipeline(tmp_path):
    return HyStokesPipeline(settings=HyStokesConfig(), config_dir=tmp_path)


def report_with(column, values):
    table = pd.DataFrame({name: [np.nan] * len(values) for name in PROBE_COLUMNS})
    table[column] = values
    return ProbeReport("polytopal", 0, "cart", 1.0, table)


class TestProbeReport:
    def test_growth(self):
        assert report_with("apriori_ratio", [0.5, 1.0, 0.8]).growth("apriori_ratio") == pytest.approx(2.0)

    def test_nonpositive_values_are_unbounded(self):
        assert report_with("apriori_ratio", [0.0, 1.0]).growth("apriori_ratio") == float("inf")

    def test_missing_column_counts_as_bounded(self):
        report = report_with("a_min", [1.0, 1.0])
        assert report.growth("inf_sup") == 1.0
        assert not report.inf_sup_positive()

    def test_bounded(self):
        report = report_with("apriori_ratio", [1.0, BOUNDED_GROWTH * 2])
        assert not report.bounded()
        assert report.bounded(("poincare_solution",))


def test_dense_probe_size_limit(pipeline):
    mesh = build_mesh("cart:20")
    config = pipeline.configure("polytopal", 1, mesh)
    result = pipeline.run(mesh, config, manufactured(1.0), compute_errors=False)
    with pytest.raises(ProbeSizeError, match="at most"):
        norm_equivalence(result.system)
    with pytest.raises(ProbeSizeError):
        inf_sup_constant(result.system)


def test_dense_probes_on_a_coarse_mesh(pipeline):
    mesh = build_mesh("tri:2")
    config = pipeline.configure("bm", 1, mesh)
    result = pipeline.run(mesh, config, manufactured(1.0), compute_errors=False)
    a_min, a_max = norm_equivalence(result.system)
    assert 0 < a_min <= a_max
    assert inf_sup_constant(result.system) > 1e-8


def test_poincare_ratio_of_a_random_field(pipeline):
    mesh = build_mesh("cart:4")
    config = pipeline.configure("polytopal", 0, mesh)
    result = pipeline.run(mesh, config, manufactured(1.0), compute_errors=False)
    dofmap = result.solution.dofmap
    x = random_velocity_field(dofmap, np.random.default_rng(0))
    assert np.all(x[dofmap.pt_offset :] == 0.0)
    assert 0 < poincare_ratio(result.elements, dofmap, x) < 1


def test_probe_run(pipeline):
    report = stability_probes(pipeline, "bm", 0, "tri", levels=2)
    assert report.method == "botti_massa"
    assert list(report.table.columns) == list(PROBE_COLUMNS)
    assert len(report.table) == 2
    assert report.bounded()
    assert report.inf_sup_positive()
    assert (report.table["zero_forcing"] == 0.0).all()
    assert (report.table["scaling_defect"] < 1e-8).all()
    assert report.to_csv().startswith("h,size,asymmetry,")


def test_probe_run_without_dense_probes(pipeline):
    report = stability_probes(pipeline, "polytopal", 0, "cart:2", levels=1, dense=False)
    assert report.table["inf_sup"].isna().all()
