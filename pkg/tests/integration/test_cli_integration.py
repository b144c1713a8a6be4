"""Integration tests for the hystokes CLI - run as a subprocess the way users call it"""

import argparse
import json
import subprocess
import sys
from pathlib import Path

import pandas as pd
import pytest

from hystokes.cli.main import EXIT_USAGE, float_list, int_list, main

PROJECT_ROOT = Path(__file__).parent.parent.parent


def run_cli(*args, cwd=PROJECT_ROOT):
    cmd = [sys.executable, "-m", "hystokes.cli.main", *args]
    result = subprocess.run(  # noqa: S603
        cmd,
        capture_output=True,
        text=True,
        cwd=cwd,
        check=False,
    )
    if result.returncode != 0:
        print("STDOUT:")
        print(result.stdout)
        print("STDERR:")
        print(result.stderr)
    return result


def test_solve_writes_errors_and_solution(tmp_path):
    result = run_cli("solve", "--method", "polytopal", "-k", "0", "--mesh", "cart:10", "--out", str(tmp_path))

    assert result.returncode == 0, f"CLI failed with return code {result.returncode}"
    errors = pd.read_csv(tmp_path / "errors.csv")
    assert errors.loc[0, "size"] == 681
    assert errors.loc[0, "h"] == pytest.approx(0.141421, abs=1e-6)
    assert errors.loc[0, "e_1h"] == pytest.approx(7.431549e-02, rel=1e-3)
    assert errors.loc[0, "e_p"] == pytest.approx(6.380900e-02, rel=1e-3)

    solution = json.loads((tmp_path / "solution.json").read_text())
    manifest = solution["manifest"]
    assert manifest["method"] == "polytopal"
    assert manifest["command"] == "solve"
    assert "metrics" in manifest


def test_solve_json_output(tmp_path):
    result = run_cli("solve", "-m", "bm", "--mesh", "tri:4", "--json", "--out", str(tmp_path))

    assert result.returncode == 0
    data = json.loads((tmp_path / "errors.json").read_text())
    assert data["method"] == "botti_massa"
    assert data["rows"][0]["size"] == 225
    assert data["rows"][0]["ocv_1h"] is None


def test_rhebergen_wells_needs_positive_degree():
    result = run_cli("solve", "--method", "rw", "-k", "0", "--mesh", "tri:2")

    assert result.returncode == 2
    assert "k >= 1" in result.stderr


def test_incompatible_mesh_is_a_usage_error():
    result = run_cli("solve", "--method", "bdfm_new", "-k", "1", "--mesh", "tri:2")
    assert result.returncode == 2


def test_mesh_info():
    result = run_cli("mesh-info", "--mesh", "cart:10")

    assert result.returncode == 0
    assert "Cells: 100" in result.stdout
    assert "Faces: 220 (180 internal, 40 boundary)" in result.stdout
    assert "Valid: True" in result.stdout


def test_check_subset(tmp_path):
    result = run_cli("check", "--method", "polytopal", "-k", "0", "--suite", "ibp", "coupling", "--out", str(tmp_path))

    assert result.returncode == 0
    frame = pd.read_csv(tmp_path / "check.csv")
    assert set(frame["suite"]) == {"ibp", "coupling"}
    assert frame["passed"].all()


def test_convergence_csv(tmp_path):
    result = run_cli(
        "convergence", "-m", "polytopal", "-k", "0", "--mesh-family", "cart:2", "--levels", "2", "--out", str(tmp_path)
    )

    assert result.returncode == 0
    table = pd.read_csv(tmp_path / "convergence_polytopal.csv")
    assert len(table) == 2
    assert pd.isna(table.loc[0, "ocv_1h"])
    assert table.loc[1, "ocv_1h"] > 0


def test_unknown_flag_exits_with_usage_error():
    result = run_cli("solve", "--method", "bm", "--mesh", "tri:2", "--no-such-flag")
    assert result.returncode == 2


class TestArgumentTypes:
    def test_int_list(self):
        assert int_list("1") == [1]
        assert int_list("0,1,2") == [0, 1, 2]
        assert int_list("0-2") == [0, 1, 2]

    @pytest.mark.parametrize("text", ["", "a", "2-0", "-1"])
    def test_bad_int_list(self, text):
        with pytest.raises(argparse.ArgumentTypeError):
            int_list(text)

    def test_float_list(self):
        assert float_list("1,1e-3") == [1.0, 1e-3]
        with pytest.raises(argparse.ArgumentTypeError):
            float_list("1,0")


def test_bad_mesh_in_process(capsys):
    assert main(["mesh-info", "--mesh", "nonsense:3"]) == EXIT_USAGE
    assert "error:" in capsys.readouterr().err
