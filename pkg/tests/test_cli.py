"""CLI contract tests: artifacts, exit codes, REPL behavior."""

import pathlib

import pytest
from click.testing import CliRunner

from levipick.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


class TestField:
    def test_writes_csv_and_figure(self, runner, tmp_path):
        res = runner.invoke(main, ["field", "--out", str(tmp_path),
                                   "--grid", "21,1,17", "--rings", "1,2"])
        assert res.exit_code == 0, res.output
        assert (tmp_path / "field.csv").exists()
        assert (tmp_path / "field.png").exists()

    def test_bad_grid_is_validation_error(self, runner, tmp_path):
        res = runner.invoke(main, ["field", "--out", str(tmp_path),
                                   "--grid", "x,y"])
        assert res.exit_code == 2

    def test_bad_ring_level_is_validation_error(self, runner, tmp_path):
        res = runner.invoke(main, ["field", "--out", str(tmp_path),
                                   "--rings", "9"])
        assert res.exit_code == 2


class TestNodes:
    def test_artifacts_and_count_message(self, runner, tmp_path):
        res = runner.invoke(main, ["nodes", "--out", str(tmp_path),
                                   "--rings", "1,2"])
        assert res.exit_code == 0, res.output
        assert "axial node" in res.output
        for name in ("nodes.csv", "axial_profile.csv", "axial.png"):
            assert (tmp_path / name).exists()

    def test_script_applied_before_scan(self, runner, tmp_path):
        script = tmp_path / "s.txt"
        script.write_text("SET 14 750\nCOMMIT\n")
        res = runner.invoke(main, ["nodes", "--out", str(tmp_path / "o"),
                                   "--rings", "1,2",
                                   "--script", str(script)])
        assert res.exit_code == 0, res.output

    def test_bad_script_line_reports_lineno(self, runner, tmp_path):
        script = tmp_path / "s.txt"
        script.write_text("SET 14 750\nWOBBLE\n")
        res = runner.invoke(main, ["nodes", "--out", str(tmp_path / "o"),
                                   "--script", str(script)])
        assert res.exit_code == 2
        assert "line 2" in res.output


class TestCompareGeometry:
    def test_reports_ratio_and_writes_artifacts(self, runner, tmp_path):
        res = runner.invoke(main, ["compare-geometry", "--out", str(tmp_path)])
        assert res.exit_code == 0, res.output
        assert "ratio" in res.output
        assert (tmp_path / "comparison.csv").exists()
        assert (tmp_path / "comparison.png").exists()


class TestImagesConvergence:
    def test_error_table(self, runner, tmp_path):
        res = runner.invoke(main, ["images-convergence", "--out", str(tmp_path),
                                   "--max-order", "2"])
        assert res.exit_code == 0, res.output
        lines = (tmp_path / "convergence.csv").read_text().strip().splitlines()
        assert len(lines) == 3  # header + 2 orders
        assert (tmp_path / "convergence.png").exists()


class TestReflectorEquiv:
    def test_equivalence_holds_and_artifacts_written(self, runner, tmp_path):
        res = runner.invoke(main, ["reflector-equiv", "--out", str(tmp_path)])
        assert res.exit_code == 0, res.output
        assert "relative RMS" in res.output
        assert (tmp_path / "reflector_equiv.csv").exists()
        assert (tmp_path / "reflector_equiv.png").exists()


class TestDeviceRepl:
    def test_ok_commit_and_error_lines(self, runner):
        res = runner.invoke(main, ["device", "repl"],
                            input="RING 1 ON\nINC 3 100\nCOMMIT\nBAD 1\nQUERY\n")
        assert res.exit_code == 0
        out = res.output.splitlines()
        assert out[0] == "ok"
        assert out[1] == "ok"
        assert out[2] == "ok commit 1"
        assert out[3].startswith("error: parse error")
        assert '"commit_counter":1' in out[4]

    def test_comments_and_blanks_skipped(self, runner):
        res = runner.invoke(main, ["device", "repl"],
                            input="# hi\n\nCOMMIT\n")
        assert res.output.splitlines() == ["ok commit 1"]


class TestConfigHandling:
    def test_missing_config_file_is_validation_error(self, runner, tmp_path):
        res = runner.invoke(main, ["nodes", "--config",
                                   str(tmp_path / "nope.yaml")])
        assert res.exit_code == 2

    def test_invalid_config_is_validation_error(self, runner, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("arrayspec:\n  kind: helix\n")
        res = runner.invoke(main, ["nodes", "--config", str(bad),
                                   "--out", str(tmp_path / "o")])
        assert res.exit_code == 2
        assert "config" in res.output
