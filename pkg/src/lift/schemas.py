from typing import Optional

from pydantic import BaseModel


class TaylorReport(BaseModel):
    lift: str
    ts: list[float]
    first_order: list[float]
    second_order: list[float]
    first_slope: Optional[float] = None
    second_slope: Optional[float] = None
    passed: bool
