"""
Tests for the property suites.
Run with: uv run pytest tests/analysis/test_properties.py -v
"""

import numpy as np
import pytest

from hystokes.analysis.properties import (
    SUITES,
    THRESHOLD,
    PropertyReport,
    RandomPolynomial,
    SuiteEntry,
    interpolator_suite,
    property_suites,
    sample_cell_mesh,
)
from hystokes.core.types import CellGeometry
from hystokes.mesh.mesh import SIMPLICIAL


class TestSuiteEntry:
    def test_bound(self):
        assert SuiteEntry("ibp", "local", "bm k=0", 1e-13).passed
        assert not SuiteEntry("ibp", "local", "bm k=0", 1e-3).passed

    def test_expected_violation(self):
        assert SuiteEntry("commutation", "average", "rtn k=1", 1e-2, expectation="violation").passed
        assert not SuiteEntry("commutation", "average", "rtn k=1", 0.0, expectation="violation").passed

    def test_report_only(self):
        assert SuiteEntry("diagnostics", "ocv", "bdfm k=1", 0.7, expectation="report").passed
        assert not SuiteEntry("diagnostics", "ocv", "bdfm k=1", np.nan, expectation="report").passed

    def test_report_frame_and_summary(self):
        report = PropertyReport(7, [SuiteEntry("a", "x", "c", 0.0), SuiteEntry("b", "y", "c", 1.0)])
        assert not report.passed
        assert [entry.suite for entry in report.failures()] == ["b"]
        assert list(report.to_frame()["passed"]) == [True, False]
        assert report.summary() == "1/2 checks passed (seed 7)"


class TestRandomPolynomial:
    def test_gradient_matches_finite_differences(self):
        field = RandomPolynomial(np.random.default_rng(0), 3)
        points = np.array([[0.3, 0.4], [0.7, 0.1]])
        eps = 1e-6
        for axis in range(2):
            shift = np.zeros(2)
            shift[axis] = eps
            fd = (field(points + shift) - field(points - shift)) / (2 * eps)
            np.testing.assert_allclose(field.gradient(points)[:, :, axis], fd, atol=1e-7)

    def test_bubble_vanishes_on_the_boundary(self):
        field = RandomPolynomial(np.random.default_rng(1), 2, bubble=True)
        points = np.array([[0.0, 0.3], [1.0, 0.6], [0.2, 0.0], [0.9, 1.0]])
        np.testing.assert_allclose(field(points), 0.0, atol=1e-14)


def test_unknown_suite():
    with pytest.raises(ValueError, match="unknown suites"):
        property_suites(["polytopal"], suites=["nonsense"])


@pytest.mark.parametrize("method", ["polytopal", "bm", "rtn_new"])
def test_local_identities_hold(method):
    report = property_suites([method], suites=["ibp", "coupling", "forms"], ks=[1])
    assert report.entries
    assert report.passed, [entry.to_dict() for entry in report.failures()]


def test_divergence_free_solutions():
    report = property_suites(["bm", "bdfm_new"], suites=["divergence_free"], ks=[0])
    assert report.entries
    assert report.passed
    assert all(entry.max_residual <= THRESHOLD for entry in report.entries)


def test_seed_determines_residuals():
    first = property_suites(["polytopal"], seed=3, suites=["commutation"], ks=[0]).to_frame()
    second = property_suites(["polytopal"], seed=3, suites=["commutation", "coupling"], ks=[0]).to_frame()
    commutation = second[second["suite"] == "commutation"].reset_index(drop=True)
    np.testing.assert_array_equal(first["max_residual"].to_numpy(), commutation["max_residual"].to_numpy())


def test_interpolator_suite():
    report = property_suites(["polytopal"], suites=["interpolators"], ks=[0])
    assert report.passed
    assert any(entry.expectation == "violation" for entry in report.entries)


def test_lowest_order_average_rows_on_simplices():
    """Affine fields: I_BDM^1 keeps the cell average, I_RTN^1 does not."""
    cell = CellGeometry.from_mesh(sample_cell_mesh(SIMPLICIAL), 0)
    entries = interpolator_suite(cell, SIMPLICIAL, seed=42, degrees=(1,))
    rows = {entry.identity: entry for entry in entries}
    bdm = rows["I_BDM^1 preserves cell averages"]
    rtn = rows["I_RTN^1 does not preserve cell averages"]
    assert bdm.max_residual <= THRESHOLD
    assert rtn.expectation == "violation"
    assert rtn.passed
    assert all(entry.passed for entry in entries)


@pytest.mark.slow
def test_all_suites_pass():
    report = property_suites()
    assert {entry.suite for entry in report.entries} <= set(SUITES)
    assert report.passed, [entry.to_dict() for entry in report.failures()]
