from typing import Any, Optional

from pydantic import BaseModel

from .constants import ChainLink, Property, Verdict, WitnessKind


class WitnessVerification(BaseModel):
    grad_norm: float
    hess_min_eig: Optional[float] = None
    downstream_gap: float
    witness_direction: list[float]
    passed: bool


class WitnessCost(BaseModel):
    kind: WitnessKind
    w: list[float]
    alpha: Optional[float] = None
    center: Optional[list[float]] = None
    verification: WitnessVerification


class PropertyVerdict(BaseModel):
    verdict: Verdict
    evidence: dict[str, Any] = {}
    witness: Optional[WitnessCost] = None
    inferred: bool = False


class PropertyReport(BaseModel):
    lift: str
    point_digest: str
    verdicts: dict[Property, PropertyVerdict]
    chain: dict[ChainLink, PropertyVerdict]
    expected: Optional[dict[Property, Optional[bool]]] = None
    matches_expected: Optional[bool] = None
