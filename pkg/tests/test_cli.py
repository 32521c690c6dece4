import json

from typer.testing import CliRunner

from liftcheck import app
from src.common.exception_handler import EXIT_BAD_INPUT, EXIT_NO_DATA

runner = CliRunner()


def test_catalog_lists_every_entry():
    result = runner.invoke(app, ["catalog"])
    assert result.exit_code == 0
    assert "hadamard: regimes=interior,boundary" in result.stdout
    assert "disk_quartic" in result.stdout


def test_check_prints_records_and_summary():
    result = runner.invoke(app, ["check", "--entry", "hadamard", "--regime", "interior", "--trials", "2"])
    assert result.exit_code == 0
    lines = [json.loads(line) for line in result.stdout.splitlines() if line.startswith("{")]
    assert [line["record"] for line in lines] == ["trial", "trial", "summary"]
    assert lines[-1]["passed"] is True


def test_check_without_config_or_entry_is_bad_input():
    result = runner.invoke(app, ["check"])
    assert result.exit_code == EXIT_BAD_INPUT


def test_unknown_regime_is_bad_input():
    result = runner.invoke(app, ["check", "--entry", "hadamard", "--regime", "outside"])
    assert result.exit_code == EXIT_BAD_INPUT


def test_config_file_with_output(tmp_path):
    out = tmp_path / "disk.jsonl"
    config = tmp_path / "disk.toml"
    config.write_text('entry = "disk_quartic"\n\n[point]\ncoordinates = [1.0, 0.0, 0.0]\n')
    result = runner.invoke(app, ["witness", "--config", str(config), "--out", str(out)])
    assert result.exit_code == 0
    assert out.exists()
    records = [json.loads(line) for line in out.read_text().splitlines()]
    kinds = sorted(w["kind"] for w in records[0]["witnesses"])
    assert kinds == ["linear", "quadratic"]


def test_plot_data_without_taylor_records(tmp_path):
    out = tmp_path / "check.jsonl"
    runner.invoke(app, ["check", "--entry", "squaring", "--regime", "interior", "--out", str(out)])
    result = runner.invoke(app, ["plot-data", "--report", str(out), "--out", str(tmp_path / "p.csv")])
    assert result.exit_code == EXIT_NO_DATA


def test_plot_data_with_missing_report(tmp_path):
    result = runner.invoke(app, ["plot-data", "--report", str(tmp_path / "none.jsonl"),
                                 "--out", str(tmp_path / "p.csv")])
    assert result.exit_code == EXIT_BAD_INPUT


def test_plot_data_short_flags_do_not_clash_with_regime(tmp_path):
    out = tmp_path / "taylor.jsonl"
    runner.invoke(app, ["taylor", "-e", "squaring", "-r", "interior", "-o", str(out)])
    csv_path = tmp_path / "p.csv"
    result = runner.invoke(app, ["plot-data", "-i", str(out), "-o", str(csv_path)])
    assert result.exit_code == 0
    assert csv_path.exists()
