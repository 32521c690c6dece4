import numpy as np
import pytest

from src.catalog.constants import EntryId
from src.common.exceptions import ConfigException, NoDataException
from src.experiment.constants import CostFamily, Task
from src.experiment.schemas import ExperimentConfig, PointSpec, SummaryRecord, TrialRecord
from src.experiment.service import (
    default_config,
    dump_record,
    emit_plot_data,
    load_config,
    read_report,
    resolve_entry,
    run,
    suite_configs,
    trial_generators,
)

HADAMARD_TOML = """
entry = "hadamard"
tasks = ["check"]
trials = 2
seed = 11

[params]
n = 3

[point]
regime = "boundary"
"""


def test_load_config(tmp_path):
    path = tmp_path / "hadamard.toml"
    path.write_text(HADAMARD_TOML)
    config = load_config(path)
    assert config.entry == EntryId.HADAMARD
    assert config.point.regime == "boundary"
    assert config.trials == 2


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(HADAMARD_TOML + "\nworkers = 3\n")
    with pytest.raises(ConfigException):
        load_config(path)


def test_load_config_rejects_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigException):
        load_config(tmp_path / "absent.toml")
    path = tmp_path / "broken.toml"
    path.write_text("entry = ")
    with pytest.raises(ConfigException):
        load_config(path)


def test_point_spec_takes_one_source():
    with pytest.raises(ValueError):
        PointSpec(regime="boundary", coordinates=[1.0, 0.0, 0.0])


def test_unknown_regime_is_a_config_error():
    with pytest.raises(ConfigException):
        resolve_entry(default_config("hadamard", [Task.CHECK], point=PointSpec(regime="nowhere")))


def test_trial_generators_are_independent_and_reproducible():
    first = [g.standard_normal(3) for g in trial_generators(5, 3)]
    again = [g.standard_normal(3) for g in trial_generators(5, 3)]
    assert all(np.array_equal(a, b) for a, b in zip(first, again))
    assert not np.allclose(first[0], first[1])


def test_check_run_is_deterministic(report_dir):
    config = default_config("hadamard", [Task.CHECK], point=PointSpec(regime="boundary"), trials=2, seed=3)
    trials, summary = run(config)
    again, _ = run(config)
    assert [dump_record(t) for t in trials] == [dump_record(t) for t in again]
    assert summary.passed
    assert summary.wall_clock is None
    assert [t.trial for t in trials] == [0, 1]


def test_report_written_and_read_back(report_dir):
    out = report_dir / "disk.jsonl"
    config = ExperimentConfig(entry=EntryId.DISK_QUARTIC, point=PointSpec(coordinates=[1.0, 0.0, 0.0]),
                              tasks=[Task.CHECK, Task.WITNESS], output=str(out))
    _, summary = run(config, timing=True)
    assert summary.passed
    assert summary.wall_clock is not None
    records = read_report(out)
    assert isinstance(records[0], TrialRecord)
    assert isinstance(records[-1], SummaryRecord)
    assert records[0].witnesses


def test_taylor_plot_data(report_dir):
    out = report_dir / "lr.jsonl"
    config = default_config("lr", [Task.TAYLOR], point=PointSpec(regime="full_rank"), output=str(out))
    trials, summary = run(config)
    assert summary.failed_validations == 0
    csv_path = emit_plot_data(read_report(out), report_dir / "taylor.csv")
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "t,residual1,residual2"
    assert len(lines) == 1 + len(trials[0].taylor.ts)


def test_plot_data_requires_matching_task(report_dir):
    trials, summary = run(default_config("hadamard", [Task.CHECK], point=PointSpec(regime="interior")))
    with pytest.raises(NoDataException):
        emit_plot_data([*trials, summary], report_dir / "missing.csv", Task.OPTIMIZE)


def test_optimize_agrees_with_projected_gradient():
    config = default_config("eigen_simplex", [Task.OPTIMIZE], params={"n": 8, "seed": 3},
                            cost=CostFamily.LINEAR, seed=3)
    trials, summary = run(config)
    outcome = trials[0].solver
    assert outcome.converged
    assert outcome.oracle_agrees
    assert summary.unconverged == 0


def test_slp_evidence_on_rank_deficient_chart():
    config = default_config("desing_chart", [Task.SLP_EVIDENCE], point=PointSpec(regime="rank_deficient"), seed=2)
    trials, _ = run(config)
    evidence = trials[0].slp.evidence
    assert trials[0].slp.verdict.value == "fails"
    assert evidence["steps_ok"] and evidence["margin_held"]


def test_suite_covers_every_entry():
    configs = suite_configs(seed=0, trials=1)
    assert {c.entry for c in configs} == set(EntryId)
    assert any(c.entry == EntryId.NODAL_CUBIC and c.tasks == [Task.WITNESS] for c in configs)
