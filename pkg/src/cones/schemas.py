from pydantic import BaseModel, Field


class Membership(BaseModel):
    inside: bool
    violation: float = Field(..., ge=0)
