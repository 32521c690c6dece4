import csv
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Annotated, Union

import numpy as np
from pydantic import Field, TypeAdapter, ValidationError

from .constants import (
    ORACLE_VALUE_TOL,
    SIGNIFICANT_DIGITS,
    SUITE_TRIALS,
    TAYLOR_COLUMNS,
    TRACE_COLUMNS,
    CostFamily,
    Task,
)
from .schemas import ExperimentConfig, PointSpec, SolverOutcome, SummaryRecord, TrialRecord
from ..catalog.constants import EntryId
from ..catalog.models import CatalogEntry
from ..catalog.service import build, regimes, sample_point
from ..checker.service import build_report, collect_witnesses, local_to_local_verdict, point_digest
from ..common.exceptions import (
    ConfigException,
    InvalidInputException,
    NoDataException,
    NotConvergedException,
)
from ..common.logger import get_logger
from ..config import settings
from ..cones.service import cone_at
from ..lift.service import taylor_residuals
from ..manifold.service import random_point, require_on_manifold
from ..numerics.service import sym_eig
from ..optimize.constants import CostKind
from ..optimize.costs import Cost, linear, random_convex_quadratic, random_quadratic_quartic
from ..optimize.schemas import SolverParams
from ..optimize.service import (
    downstream_stationarity,
    fd_validate,
    find_second_order_point,
    projected_gradient_oracle,
    projection_for,
)

logger = get_logger(__name__)

_RECORD = TypeAdapter(Annotated[Union[TrialRecord, SummaryRecord], Field(discriminator="record")])


def load_config(path) -> ExperimentConfig:
    """Read and validate a TOML experiment config."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        logger.warning(f"Config not found: {path}")
        raise ConfigException(f"Config file {path} does not exist")
    except tomllib.TOMLDecodeError as exc:
        logger.warning(f"Unparseable config {path}: {exc}")
        raise ConfigException(f"Config file {path} is not valid TOML: {exc}")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        logger.warning(f"Invalid config {path}")
        raise ConfigException(f"Invalid config {path}: {exc}")


def default_config(entry_id, tasks: list[Task], **overrides) -> ExperimentConfig:
    try:
        return ExperimentConfig(entry=entry_id, tasks=tasks, **{k: v for k, v in overrides.items() if v is not None})
    except ValidationError as exc:
        raise ConfigException(f"Invalid options: {exc}")


def resolve_entry(config: ExperimentConfig) -> CatalogEntry:
    """Build the config's catalog entry and check the point spec against it."""
    try:
        entry = build(config.entry, **config.params)
    except InvalidInputException as exc:
        raise ConfigException(exc.detail)
    regime = config.point.regime
    if regime is not None and regime not in entry.regimes:
        logger.warning(f"Regime {regime} not defined for {entry.name}")
        raise ConfigException(f"Regime {regime!r} not defined for {config.entry.value}; expected one of {regimes(entry)}")
    return entry


def trial_generators(seed: int, trials: int) -> list[np.random.Generator]:
    """Independent Philox streams, one per trial."""
    children = np.random.SeedSequence(seed).spawn(trials)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def _trial_point(entry: CatalogEntry, spec: PointSpec, rng) -> np.ndarray:
    if spec.coordinates is not None:
        return require_on_manifold(entry.lift.manifold, spec.coordinates)
    if spec.regime is not None:
        return sample_point(entry, spec.regime, rng)
    return random_point(entry.lift.manifold, rng)


def make_cost(family: CostFamily, dim: int, rng) -> Cost:
    if family == CostFamily.LINEAR:
        return linear(rng.standard_normal(dim))
    if family == CostFamily.CONVEX_QUADRATIC:
        return random_convex_quadratic(dim, rng)
    return random_quadratic_quartic(dim, rng)


def _lipschitz(cost: Cost) -> float | None:
    if cost.kind == CostKind.LINEAR:
        return 1.0
    if cost.kind == CostKind.QUADRATIC:
        return max(float(sym_eig(cost.params["a"])[0][-1]), 1e-12)
    return None


def _solve(entry: CatalogEntry, cost: Cost, y0: np.ndarray, seed: int) -> SolverOutcome:
    lift = entry.lift
    try:
        y, certificate = find_second_order_point(lift, cost, y0, SolverParams(seed=seed))
        converged = True
    except NotConvergedException as exc:
        y, certificate, converged = exc.best_point, exc.certificate, False
    x = np.asarray(lift.phi(y), dtype=float).reshape(-1)
    gap = downstream_stationarity(lift, cost, y, cone_at(entry.set_desc, x))
    outcome = SolverOutcome(converged=converged, certificate=certificate, downstream_gap=gap)
    lipschitz = _lipschitz(cost)
    if lipschitz is None:
        return outcome
    try:
        projection_for(entry.set_desc)
    except InvalidInputException:
        return outcome
    _, oracle = projected_gradient_oracle(cost, entry.set_desc, np.asarray(lift.phi(y0)).reshape(-1), lipschitz)
    outcome.oracle_value = oracle
    outcome.oracle_agrees = abs(certificate.value - oracle) <= ORACLE_VALUE_TOL * max(1.0, abs(oracle))
    return outcome


def run_trial(config: ExperimentConfig, entry: CatalogEntry, index: int, rng) -> TrialRecord:
    lift = entry.lift
    y = _trial_point(entry, config.point, rng)
    seed = int(rng.integers(2 ** 31 - 1))
    record = TrialRecord(trial=index, point_digest=point_digest(y))
    for task in config.tasks:
        logger.debug(f"Trial {index}: {task.value} on {lift.name}")
        if task == Task.CHECK:
            record.report = build_report(lift, y, entry.set_desc, entry, seed)
        elif task == Task.WITNESS:
            record.witnesses = collect_witnesses(lift, y, entry.set_desc, seed)
        elif task == Task.OPTIMIZE:
            record.solver = _solve(entry, make_cost(config.cost, lift.ambient_dim, rng), y, seed)
        elif task == Task.TAYLOR:
            record.taylor = taylor_residuals(lift, y, seed=seed)
            record.fd = fd_validate(lift, random_quadratic_quartic(lift.ambient_dim, rng), y, seed=seed)
        elif task == Task.SLP_EVIDENCE:
            record.slp = local_to_local_verdict(entry, y, seed)
    return record


def summarize(config: ExperimentConfig, trials: list[TrialRecord], wall_clock: float | None = None) -> SummaryRecord:
    witnesses = []
    for trial in trials:
        witnesses.extend(trial.witnesses or [])
        if trial.report is not None:
            witnesses.extend(v.witness for v in trial.report.verdicts.values() if v.witness is not None)
    return SummaryRecord(
        config=config,
        trials=len(trials),
        mismatches=sum(t.report is not None and t.report.matches_expected is False for t in trials),
        failed_witnesses=sum(not w.verification.passed for w in witnesses),
        unconverged=sum(t.solver is not None and not t.solver.converged for t in trials),
        failed_validations=sum(
            (t.taylor is not None and not t.taylor.passed) or (t.fd is not None and not t.fd.passed) for t in trials
        ),
        passed=all(t.passed for t in trials),
        wall_clock=wall_clock,
    )


def run(config: ExperimentConfig, timing: bool = False) -> tuple[list[TrialRecord], SummaryRecord]:
    """Run every trial of config concurrently; results come back in trial order."""
    started = time.perf_counter()
    entry = resolve_entry(config)
    generators = trial_generators(config.seed, config.trials)
    with ThreadPoolExecutor(max_workers=settings.WORKERS) as pool:
        futures = [pool.submit(run_trial, config, entry, i, rng) for i, rng in enumerate(generators)]
        trials = [future.result() for future in futures]
    summary = summarize(config, trials, time.perf_counter() - started if timing else None)
    if config.output:
        write_report([*trials, summary], config.output)
    logger.info(f"{entry.name}: {len(trials)} trials, passed={summary.passed}")
    return trials, summary


def _rounded(value):
    if isinstance(value, float):
        return float(f"{value:.{SIGNIFICANT_DIGITS}g}")
    if isinstance(value, list):
        return [_rounded(v) for v in value]
    if isinstance(value, dict):
        return {k: _rounded(v) for k, v in value.items()}
    return value


def dump_record(record: TrialRecord | SummaryRecord) -> str:
    rounded = type(record).model_validate(_rounded(record.model_dump(mode="json")))
    return rounded.model_dump_json()


def write_report(records: list[TrialRecord | SummaryRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        for record in records:
            fh.write(dump_record(record) + "\n")
    logger.info(f"Report written to {path}")
    return path


def read_report(path) -> list[TrialRecord | SummaryRecord]:
    path = Path(path)
    if not path.exists():
        logger.warning(f"Report not found: {path}")
        raise InvalidInputException(f"Report {path} does not exist")
    with open(path) as fh:
        return [_RECORD.validate_json(line) for line in fh if line.strip()]


def emit_plot_data(records: list[TrialRecord | SummaryRecord], out, task: Task = Task.TAYLOR,
                   trial: int = 0) -> Path:
    """CSV of a trial's Taylor residuals (t,residual1,residual2) or solver trace (iter,gradnorm,mineig)."""
    matching = [r for r in records if isinstance(r, TrialRecord) and r.trial == trial]
    if task == Task.TAYLOR:
        series = [r.taylor for r in matching if r.taylor is not None]
        if not series:
            raise NoDataException(f"Trial {trial} has no taylor data")
        header = TAYLOR_COLUMNS
        rows = list(zip(series[0].ts, series[0].first_order, series[0].second_order))
    elif task == Task.OPTIMIZE:
        series = [r.solver for r in matching if r.solver is not None]
        if not series:
            raise NoDataException(f"Trial {trial} has no optimize data")
        header = TRACE_COLUMNS
        cert = series[0].certificate
        rows = [(i, g, "" if e is None else e) for i, (g, e) in enumerate(zip(cert.grad_trace, cert.min_eig_trace))]
    else:
        raise NoDataException(f"No plot data for task {task.value}")
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    logger.info(f"Plot data for trial {trial} written to {out}")
    return out


def suite_configs(seed: int, trials: int = SUITE_TRIALS) -> list[ExperimentConfig]:
    """Every regime of every entry checked, Taylor-validated, plus the counterexample and solver runs."""
    configs = []
    for entry_id in EntryId:
        names = regimes(build(entry_id))
        for regime in names:
            configs.append(ExperimentConfig(entry=entry_id, point=PointSpec(regime=regime),
                                            tasks=[Task.CHECK], trials=trials, seed=seed))
        configs.append(ExperimentConfig(entry=entry_id, point=PointSpec(regime=names[0]),
                                        tasks=[Task.TAYLOR], trials=trials, seed=seed))
    configs += [
        ExperimentConfig(entry=EntryId.NODAL_CUBIC, point=PointSpec(coordinates=[0.0, 0.0, -1.0]),
                         tasks=[Task.WITNESS], seed=seed),
        ExperimentConfig(entry=EntryId.DISK_QUARTIC, point=PointSpec(coordinates=[1.0, 0.0, 0.0]),
                         tasks=[Task.WITNESS], seed=seed),
        ExperimentConfig(entry=EntryId.HADAMARD, params={"n": 10}, point=PointSpec(regime="interior"),
                         tasks=[Task.OPTIMIZE], cost=CostFamily.CONVEX_QUADRATIC, trials=trials, seed=seed),
        ExperimentConfig(entry=EntryId.EIGEN_SIMPLEX, params={"n": 8, "seed": seed},
                         tasks=[Task.OPTIMIZE], cost=CostFamily.LINEAR, trials=trials, seed=seed),
        ExperimentConfig(entry=EntryId.DESING_CHART, point=PointSpec(regime="rank_deficient"),
                         tasks=[Task.SLP_EVIDENCE], trials=trials, seed=seed),
        ExperimentConfig(entry=EntryId.SVD, point=PointSpec(regime="repeated"),
                         tasks=[Task.SLP_EVIDENCE], trials=trials, seed=seed),
    ]
    return configs


def suite(seed: int, out, trials: int = SUITE_TRIALS, timing: bool = False) -> list[SummaryRecord]:
    """Run the acceptance matrix and write all records, config by config, to one report."""
    records, summaries = [], []
    for config in suite_configs(seed, trials):
        trial_records, summary = run(config, timing)
        records.extend([*trial_records, summary])
        summaries.append(summary)
    write_report(records, out)
    failed = sum(not s.passed for s in summaries)
    logger.info(f"Suite finished: {len(summaries) - failed} of {len(summaries)} configs passed")
    return summaries
