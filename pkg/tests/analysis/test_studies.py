"""
Tests for convergence tables, observed rates and the pressure-robustness sweep.
Run with: uv run pytest tests/analysis/test_studies.py -v
"""

import json

import numpy as np
import pytest

from hystokes.analysis.studies import (
    OCV_COLUMNS,
    StudyResult,
    convergence_study,
    observed_rates,
    robustness_sweep,
    study_columns,
    study_meshes,
)
from hystokes.scheme.pipeline import HyStokesPipeline
from hystokes.utils.config import HyStokesConfig


@pytest.fixture
def pipeline(tmp_path):
    return HyStokesPipeline(settings=HyStokesConfig(), config_dir=tmp_path)


class TestObservedRates:
    def test_first_level_undefined(self):
        assert observed_rates([1.0], [0.5]) == [None]

    def test_quadratic_decay(self):
        h = [0.4, 0.2, 0.1]
        rates = observed_rates([c * x**2 for c, x in zip([3.0] * 3, h)], h)
        assert rates[0] is None
        assert rates[1] == pytest.approx(2.0)
        assert rates[2] == pytest.approx(2.0)

    def test_zero_error_gives_no_rate(self):
        assert observed_rates([1e-3, 0.0], [0.2, 0.1]) == [None, None]


class TestStudyResult:
    @pytest.fixture
    def rows(self):
        rows = []
        for k, order in ((0, 1), (1, 2)):
            for h in (0.2, 0.1):
                errors = {name: h**order for name in ("e_1h", "e_grad_rec", "e_L2", "e_rec", "e_p")}
                rows.append({"h": h, "k": k, "size": 10, **errors, "e_grad_p": 0.0, "full_size": 12})
        return rows

    def test_rates_per_degree(self, rows):
        study = StudyResult.from_rows("polytopal", 1.0, "cart", rows)
        table = study.table
        assert list(table.columns) == study_columns()
        assert np.isnan(table.loc[0, OCV_COLUMNS["e_1h"]])
        assert table.loc[1, OCV_COLUMNS["e_1h"]] == pytest.approx(1.0)
        assert np.isnan(table.loc[2, OCV_COLUMNS["e_1h"]])
        assert table.loc[3, OCV_COLUMNS["e_p"]] == pytest.approx(2.0)
        assert study.finest(1)["h"] == 0.1

    def test_csv_leaves_first_rate_empty(self, rows):
        lines = StudyResult.from_rows("polytopal", 1.0, "cart", rows).to_csv().splitlines()
        assert lines[0].startswith("h,k,size,e_1h,ocv_1h,")
        assert lines[1].split(",")[4] == ""
        assert lines[2].split(",")[4] == "1.000000e+00"

    def test_json_uses_null_for_missing_rates(self, rows, tmp_path):
        path = tmp_path / "study.json"
        StudyResult.from_rows("polytopal", 1.0, "cart", rows, {"seed": 1}).to_json(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        assert data["manifest"] == {"seed": 1}
        assert data["rows"][0]["ocv_1h"] is None

    def test_empty_rows(self):
        assert StudyResult.from_rows("bm", 1.0, "tri", []).table.empty


def test_study_meshes_double():
    meshes = study_meshes("cart:2", 3)
    assert [mesh.n_cells for mesh in meshes] == [4, 16, 64]
    with pytest.raises(ValueError, match="at least 1"):
        study_meshes("cart", 0)


def test_convergence_study_rates(pipeline):
    study = convergence_study(pipeline, "polytopal", [0], "cart:4", 3)
    assert len(study.table) == 3
    assert list(study.table["size"]) == sorted(study.table["size"])
    assert study.table[OCV_COLUMNS["e_1h"]].iloc[-1] > 0.8
    assert study.table[OCV_COLUMNS["e_L2"]].iloc[-1] > 1.0


def test_aliases_resolve_in_study(pipeline):
    assert convergence_study(pipeline, "bm", [0], "tri", 1).method == "botti_massa"


class TestRobustness:
    def test_pressure_robust_method(self, pipeline):
        report = robustness_sweep(pipeline, "bm", 0, "tri", 2, [1.0, 1e-3])
        assert report.robust()
        assert set(report.pressure_scaling) == {1.0, 1e-3}
        assert report.pressure_scaling[1.0] == 0.0
        assert not report.flagged
        summary = report.summary()
        assert list(summary["nu"]) == [1.0, 1e-3]

    def test_needs_a_viscosity(self, pipeline):
        with pytest.raises(ValueError, match="at least one viscosity"):
            robustness_sweep(pipeline, "bm", 0, "tri", 1, [])
