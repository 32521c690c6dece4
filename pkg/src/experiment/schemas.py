from typing import Any, Literal, Optional

from pydantic import BaseModel, Field, model_validator

from .constants import CostFamily, Task
from ..catalog.constants import EntryId
from ..checker.schemas import PropertyReport, PropertyVerdict, WitnessCost
from ..config import settings
from ..lift.schemas import TaylorReport
from ..optimize.schemas import FdReport, SolverCertificate


class PointSpec(BaseModel):
    """Where trial points come from: a regime tag, explicit coordinates, or (neither) a random manifold point."""

    regime: Optional[str] = None
    coordinates: Optional[list[float]] = None

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def one_source(self):
        if self.regime is not None and self.coordinates is not None:
            raise ValueError("point takes either a regime or coordinates, not both")
        return self


class ExperimentConfig(BaseModel):
    entry: EntryId
    params: dict[str, Any] = {}
    point: PointSpec = PointSpec()
    tasks: list[Task] = Field(default_factory=lambda: [Task.CHECK], min_length=1)
    trials: int = Field(default=1, ge=1)
    seed: int = Field(default=settings.DEFAULT_SEED, ge=0)
    cost: CostFamily = CostFamily.CONVEX_QUADRATIC
    output: Optional[str] = None

    class Config:
        extra = "forbid"


class SolverOutcome(BaseModel):
    converged: bool
    certificate: SolverCertificate
    downstream_gap: Optional[float] = None
    oracle_value: Optional[float] = None
    oracle_agrees: Optional[bool] = None


class TrialRecord(BaseModel):
    record: Literal["trial"] = "trial"
    trial: int
    point_digest: str
    report: Optional[PropertyReport] = None
    witnesses: Optional[list[WitnessCost]] = None
    solver: Optional[SolverOutcome] = None
    taylor: Optional[TaylorReport] = None
    fd: Optional[FdReport] = None
    slp: Optional[PropertyVerdict] = None

    @property
    def passed(self) -> bool:
        matched = self.report is None or self.report.matches_expected is not False
        witnesses = self.witnesses or []
        if self.report is not None:
            witnesses = witnesses + [v.witness for v in self.report.verdicts.values() if v.witness is not None]
        return matched and all(w.verification.passed for w in witnesses)


class SummaryRecord(BaseModel):
    record: Literal["summary"] = "summary"
    config: ExperimentConfig
    trials: int
    mismatches: int = 0
    failed_witnesses: int = 0
    unconverged: int = 0
    failed_validations: int = 0
    passed: bool
    wall_clock: Optional[float] = None
