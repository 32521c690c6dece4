from typing import Optional

from pydantic import BaseModel, Field

from .constants import HessianSource, StopReason
from ..config import settings


class SolverParams(BaseModel):
    grad_tol: float = Field(default=settings.SOLVER_GRAD_TOL, gt=0)
    hess_tol: float = Field(default=settings.SOLVER_HESS_TOL, gt=0)
    max_iters: int = Field(default=settings.SOLVER_MAX_ITERS, gt=0)
    perturbation: float = Field(default=settings.SOLVER_PERTURBATION, gt=0)
    seed: int = Field(default=settings.DEFAULT_SEED, ge=0)

    class Config:
        frozen = True


class SolverCertificate(BaseModel):
    value: float
    grad_norm: float
    hess_min_eig: Optional[float] = None
    iterations: int
    negative_curvature_steps: int = 0
    perturbations: int = 0
    stop_reason: StopReason
    grad_trace: list[float] = []
    min_eig_trace: list[Optional[float]] = []


class FdReport(BaseModel):
    lift: str
    ts: list[float]
    grad_residuals: list[float]
    hess_residuals: list[float]
    grad_slope: Optional[float] = None
    hess_slope: Optional[float] = None
    hessian_source: HessianSource = HessianSource.CLOSED_FORM
    fallback_hess_slope: Optional[float] = None
    passed: bool
