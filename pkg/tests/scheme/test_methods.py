"""
Tests for the method registry and method configuration.
Run with: uv run pytest tests/scheme/test_methods.py -v
"""

import logging
from pathlib import Path

import pytest

from hystokes.core.types import CellGeometry, ClosureCase, SigmaChoice, StabilizationKind
from hystokes.mesh.generators import build_mesh
from hystokes.scheme.methods import (
    MeshCompatibilityError,
    MethodConfigurationError,
    MethodRegistry,
    default_eta,
    make_config,
    self_check,
)


@pytest.fixture
def registry():
    return MethodRegistry()


class TestRegistry:
    def test_five_methods(self, registry):
        assert registry.names() == ["botti_massa", "rhebergen_wells", "rtn_new", "bdfm_new", "polytopal"]

    @pytest.mark.parametrize(
        ("alias", "name"),
        [
            ("botti-massa", "botti_massa"),
            ("bm", "botti_massa"),
            ("rw", "rhebergen_wells"),
            ("rhebergen-wells", "rhebergen_wells"),
            ("rtn", "rtn_new"),
            ("bdfm-new", "bdfm_new"),
            ("polytopal", "polytopal"),
        ],
    )
    def test_aliases(self, registry, alias, name):
        assert registry.resolve(alias) == name

    def test_unknown_method(self, registry):
        with pytest.raises(MethodConfigurationError, match="unknown method"):
            registry.resolve("taylor-hood")

    def test_only_polytopal_stabilizes_pressure(self, registry):
        deltas = {name: registry.get_spec(name).delta for name in registry.names()}
        assert deltas == {"botti_massa": 0, "rhebergen_wells": 0, "rtn_new": 0, "bdfm_new": 0, "polytopal": 1}

    def test_yaml_rows_merge_over_defaults(self, tmp_path):
        path = tmp_path / "methods.yaml"
        path.write_text('botti_massa:\n  description: "custom row"\n', encoding="utf-8")
        spec = MethodRegistry(path).get_spec("bm")
        assert spec.description == "custom row"
        assert spec.ut_shift == 1
        assert spec.pf_shift == 1

    def test_shipped_yaml_matches_builtin_rows(self, registry):
        shipped = MethodRegistry(Path(__file__).parents[2] / "config" / "methods.yaml")
        assert {name: shipped.get_spec(name) for name in shipped.names()} == {
            name: registry.get_spec(name) for name in registry.names()
        }

    def test_rows_for_unknown_methods_are_ignored(self, tmp_path, caplog):
        path = tmp_path / "methods.yaml"
        path.write_text("taylor_hood:\n  delta: 1\n", encoding="utf-8")
        with caplog.at_level(logging.WARNING, logger="hystokes"):
            names = MethodRegistry(path).names()
        assert "taylor_hood" not in names
        assert "taylor_hood" in caplog.text

    def test_unknown_assumption(self, tmp_path):
        path = tmp_path / "methods.yaml"
        path.write_text("polytopal:\n  assumptions: [DT, magic]\n", encoding="utf-8")
        with pytest.raises(MethodConfigurationError, match="unknown assumptions"):
            MethodRegistry(path)

    def test_unreadable_yaml_falls_back(self, tmp_path):
        path = tmp_path / "methods.yaml"
        path.write_text("botti_massa: [unclosed\n", encoding="utf-8")
        assert MethodRegistry(path).get_spec("bm").min_k == 0


class TestMakeConfig:
    def test_rw_needs_k_one(self):
        with pytest.raises(MethodConfigurationError, match="k >= 1"):
            make_config("rhebergen-wells", 0)

    def test_rw_default_eta(self):
        config = make_config("rw", 1)
        assert config.stabilization.eta == default_eta(1) == 24.0
        assert config.ut_degree == 1
        assert config.pt_degree == 0

    def test_rw_eta_override(self):
        assert make_config("rw", 2, {"eta": 100}).stabilization.eta == 100.0
        with pytest.raises(MethodConfigurationError):
            make_config("rw", 2, {"eta": -1})

    def test_degrees_botti_massa(self):
        config = make_config("bm", 2)
        assert (config.ut_degree, config.uf_degree, config.pt_degree, config.pf_degree) == (3, 2, 2, 3)
        assert config.w_degree == 3
        assert config.quad_degree == 8

    def test_quad_bump(self):
        assert make_config("polytopal", 1, {"quad_bump": 3}).quad_degree == 2 * 3 + 3
        with pytest.raises(MethodConfigurationError):
            make_config("polytopal", 1, {"quad_bump": -1})

    @pytest.mark.parametrize(
        ("method", "k", "closure"),
        [
            ("rtn", 0, ClosureCase.FACE_AVERAGE),
            ("bdfm", 0, ClosureCase.FACE_AVERAGE),
            ("rtn", 1, ClosureCase.CELL_AVERAGE),
            ("bm", 0, ClosureCase.CELL_AVERAGE),
        ],
    )
    def test_closure(self, method, k, closure):
        assert make_config(method, k).closure is closure

    def test_boxed_variant(self):
        config = make_config("rtn", 1, {"stabilization": "hho_boxed"})
        assert config.boxed
        assert config.stabilization.kind is StabilizationKind.HHO_BOXED
        assert config.label() == "rtn_new+boxed k=1"

    def test_boxed_only_for_rtn_and_bdfm(self):
        with pytest.raises(MethodConfigurationError, match="hho_boxed"):
            make_config("bm", 1, {"stabilization": "hho_boxed"})

    def test_unsupported_stabilization(self):
        with pytest.raises(MethodConfigurationError):
            make_config("polytopal", 1, {"stabilization": "rhebergen_wells"})

    def test_sigma_choice(self):
        assert make_config("bm", 1, {"sigma": "gradient"}).sigma_choice is SigmaChoice.GRADIENT
        with pytest.raises(MethodConfigurationError):
            make_config("bm", 1, {"sigma": "tensor"})

    def test_unknown_override(self):
        with pytest.raises(MethodConfigurationError, match="unknown overrides"):
            make_config("bm", 1, {"penalty": 3})


class TestMeshCompatibility:
    @pytest.mark.parametrize(("method", "spec"), [("bdfm", "tri:2"), ("bm", "cart:2"), ("rtn", "hexa:2")])
    def test_incompatible(self, method, spec):
        with pytest.raises(MeshCompatibilityError):
            make_config(method, 0, mesh=build_mesh(spec))

    @pytest.mark.parametrize("spec", ["tri:2", "cart:2", "hexa:2", "locref:1"])
    def test_polytopal_runs_everywhere(self, spec):
        config = make_config("polytopal", 1, mesh=build_mesh(spec))
        assert config.delta == 1

    @pytest.mark.parametrize(
        ("method", "k", "spec"),
        [
            ("bm", 0, "tri:2"),
            ("bm", 0, "tri:4"),
            ("rw", 1, "tri:2"),
            ("rw", 2, "tri:2"),
            ("rtn", 1, "tri:2"),
            ("bdfm", 2, "cart:2"),
        ],
    )
    def test_self_check_passes(self, method, k, spec):
        make_config(method, k, mesh=build_mesh(spec))


class TestAveragePreservation:
    @pytest.mark.parametrize(("method", "k"), [("bm", 0), ("rw", 1)])
    def test_bdm_interpolates_keep_cell_averages(self, method, k):
        mesh = build_mesh("tri:4")
        results = self_check(make_config(method, k), CellGeometry.from_mesh(mesh, 3))
        assert results["pi_P0 o I_UT = pi_P0"] < 1e-10

    def test_rtn_lowest_order_defect_is_reported(self):
        mesh = build_mesh("tri:2")
        results = self_check(make_config("rtn", 0), CellGeometry.from_mesh(mesh, 0))
        assert results["pi_P0 o I_UT = pi_P0"] > 1e-6
