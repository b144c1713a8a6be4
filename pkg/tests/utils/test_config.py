"""
Tests for the run-level configuration.
Run with: uv run pytest tests/utils/test_config.py -v
"""

from pathlib import Path

import pytest
import yaml

from hystokes.utils.config import THREADS_ENV_VAR, ConfigManager, HyStokesConfig


def test_defaults():
    config = HyStokesConfig()
    assert config.sigma == "matrix"
    assert config.condense is True
    assert config.seed == 42
    assert config.error_degree == 16


def test_load_from_yaml(tmp_path):
    path = tmp_path / "hystokes.yaml"
    path.write_text(yaml.safe_dump({"quad_bump": 2, "results_db_path": "data/r.duckdb", "seed": 7}))

    config = ConfigManager(path).config

    assert config.quad_bump == 2
    assert config.seed == 7
    assert config.results_db_path == Path("data/r.duckdb")


def test_missing_file_gives_defaults(tmp_path):
    assert ConfigManager(tmp_path / "absent.yaml").config == HyStokesConfig()


def test_unknown_key_falls_back_to_defaults(tmp_path):
    path = tmp_path / "hystokes.yaml"
    path.write_text("not_a_setting: 1\n")
    assert ConfigManager(path).config == HyStokesConfig()


def test_update_ignores_none():
    manager = ConfigManager()
    manager.update_config(eta=12.0, sigma=None, condense=False)
    assert manager.config.eta == 12.0
    assert manager.config.sigma == "matrix"
    assert manager.config.condense is False


def test_update_rejects_unknown_key():
    with pytest.raises(ValueError, match="Invalid config key"):
        ConfigManager().update_config(colour="blue")


def test_save_and_reload(tmp_path):
    path = tmp_path / "out" / "hystokes.yaml"
    manager = ConfigManager(path)
    manager.update_config(log_file=tmp_path / "run.log", threads=3)
    manager.save_config()

    reloaded = ConfigManager(path).config
    assert reloaded.threads == 3
    assert reloaded.log_file == tmp_path / "run.log"


def test_save_without_path():
    with pytest.raises(ValueError, match="No config path"):
        ConfigManager().save_config()


def test_default_config_file(tmp_path):
    path = tmp_path / "config" / "hystokes.yaml"
    ConfigManager.create_default_config_file(path)
    config = ConfigManager(path).config
    assert config.methods_config_path == path.parent / "methods.yaml"


class TestThreads:
    def test_explicit_setting_wins(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "8")
        assert HyStokesConfig(threads=2).resolved_threads() == 2

    def test_environment(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "4")
        assert HyStokesConfig().resolved_threads() == 4

    def test_bad_environment_value(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "many")
        assert HyStokesConfig().resolved_threads() == 1

    def test_default(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
        assert HyStokesConfig().resolved_threads() == 1
