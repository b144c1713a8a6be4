"""
Tests for logging setup.
Run with: uv run pytest tests/utils/test_logger.py -v
"""

import logging
import warnings

import pytest

from hystokes.utils.logger import get_logger, setup_logging


def test_logger_namespace():
    assert get_logger("scheme.solver").name == "hystokes.scheme.solver"
    assert get_logger("hystokes.mesh").name == "hystokes.mesh"


def test_verbose_means_debug():
    setup_logging("WARNING", verbose=True)
    assert logging.getLogger("hystokes").level == logging.DEBUG


def test_log_file(tmp_path):
    log_file = tmp_path / "logs" / "run.log"
    setup_logging("INFO", log_file=log_file)
    get_logger("tests").info("written to the file only")
    for handler in logging.getLogger().handlers:
        handler.flush()
    assert "written to the file only" in log_file.read_text()
    setup_logging("INFO")


def test_unknown_level_raises():
    with pytest.raises(ValueError, match="Unknown log level"):
        setup_logging("LOUD")


def test_repeated_setup_keeps_one_console_handler(tmp_path):
    setup_logging("INFO", log_file=tmp_path / "a.log")
    setup_logging("INFO")
    assert len(logging.getLogger().handlers) == 1


def read_log(log_file):
    for handler in logging.getLogger().handlers:
        handler.flush()
    return log_file.read_text()


def test_python_warnings_reach_the_log(tmp_path):
    log_file = tmp_path / "warn.log"
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        setup_logging("INFO", log_file=log_file)
        warnings.warn("matrix is close to singular", RuntimeWarning, stacklevel=1)
    assert "matrix is close to singular" in read_log(log_file)
    setup_logging("INFO")


def test_setup_reinstalls_warning_capture(tmp_path):
    log_file = tmp_path / "warn.log"
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        setup_logging("INFO")
        warnings.showwarning = lambda *args, **kwargs: None
        setup_logging("INFO", log_file=log_file)
        warnings.warn("ill-conditioned local mass matrix", RuntimeWarning, stacklevel=1)
    assert "ill-conditioned local mass matrix" in read_log(log_file)
    setup_logging("INFO")
