from pydantic import BaseModel, Field

from src.config import settings


class TolerancePolicy(BaseModel):
    rank_tol_factor: float = Field(default=settings.RANK_TOL_FACTOR, gt=0)
    psd_tol: float = Field(default=settings.PSD_TOL, gt=0)
    zero_tol: float = Field(default=settings.ZERO_TOL, gt=0)

    class Config:
        frozen = True
