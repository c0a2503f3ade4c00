"""Tests for the typer command line."""

import json

import pytest
from typer.testing import CliRunner

runner = CliRunner()


@pytest.fixture(autouse=True)
def _no_output_env(monkeypatch):
    from fdtransport.config import OUTPUT_DIR_ENV
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)


@pytest.fixture(autouse=True)
def _wide_console(monkeypatch):
    from fdtransport.cli import console
    monkeypatch.setattr(console, "width", 200)


def _write_config(tmp_path, body: str):
    path = tmp_path / "run.yaml"
    path.write_text(body)
    return path


class TestPresetsCommand:
    def test_lists_all(self):
        from fdtransport.cli import app
        result = runner.invoke(app, ["presets"])
        assert result.exit_code == 0
        assert "rotation" in result.output
        assert "gaussian_bump" in result.output

    def test_filter_by_kind(self):
        from fdtransport.cli import app
        result = runner.invoke(app, ["presets", "--kind", "initial"])
        assert result.exit_code == 0
        assert "sphere" in result.output
        assert "steep_vortex" not in result.output


class TestValidateConfig:
    def test_ok(self, tmp_path):
        from fdtransport.cli import app
        path = _write_config(tmp_path, "grid:\n  h: 0.25\ntime:\n  T: 0.1\n")
        result = runner.invoke(app, ["validate-config", str(path)])
        assert result.exit_code == 0
        assert "OK" in result.output

    def test_bad_exponent_exits_2(self, tmp_path):
        from fdtransport.cli import app
        path = _write_config(tmp_path, "explicit:\n  beta: 0.4\n")
        result = runner.invoke(app, ["validate-config", str(path)])
        assert result.exit_code == 2
        assert "ConfigError" in result.output

    def test_missing_file_exits_2(self, tmp_path):
        from fdtransport.cli import app
        result = runner.invoke(app, ["validate-config", str(tmp_path / "absent.yaml")])
        assert result.exit_code == 2


class TestRunCommand:
    def test_run_writes_manifest(self, tmp_path):
        from fdtransport.cli import app
        path = _write_config(tmp_path, "time:\n  T: 0.1\n")
        out = tmp_path / "out"
        result = runner.invoke(
            app, ["run", "--config", str(path), "--h", "0.25", "--output", str(out), "--name", "cli"],
        )
        assert result.exit_code == 0, result.output
        data = json.loads((out / "cli" / "manifest.json").read_text())
        assert data["exit_code"] == 0
        assert data["metadata"]["h"] == 0.25
        assert "final_l2" in result.output

    def test_run_failure_exit_code(self, tmp_path):
        from fdtransport.cli import app
        path = _write_config(tmp_path, "time:\n  T: 0.1\nvelocity:\n  preset: no_such_field\n")
        out = tmp_path / "out"
        result = runner.invoke(app, ["run", "-c", str(path), "--h", "0.25", "-o", str(out), "-n", "bad"])
        assert result.exit_code == 2
        assert json.loads((out / "bad" / "manifest.json").read_text())["exit_code"] == 2

    @pytest.mark.slow
    def test_study(self, tmp_path):
        from fdtransport.cli import app
        path = _write_config(tmp_path, "time:\n  T: 0.1\noracle:\n  enabled: true\n  sample: 200\n")
        out = tmp_path / "out"
        result = runner.invoke(app, ["study", "0.25", "0.2", "-c", str(path), "-o", str(out), "-n", "conv"])
        assert result.exit_code == 0, result.output
        assert "Fitted orders" in result.output
        assert (out / "conv" / "convergence.csv").exists()
