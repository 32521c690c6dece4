from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .constants import EntryId
from ..checker.constants import Property
from ..cones.sets import SetDesc
from ..lift.models import Lift


@dataclass(frozen=True, eq=False)
class PathologicalSequence:
    """Points x_i of X converging to phi(y) that admit no lifts converging to y."""

    point: Callable[[int], np.ndarray]
    label: str


@dataclass(frozen=True, eq=False)
class CatalogEntry:
    id: EntryId
    lift: Lift
    set_desc: SetDesc
    regimes: dict[str, Callable[[np.random.Generator], np.ndarray]]
    expected: dict[Property, Callable[[np.ndarray], bool | None]]
    params: dict[str, Any] = field(default_factory=dict)
    pathology: Callable[[np.ndarray, np.random.Generator], PathologicalSequence | None] | None = None
    fiber_distance: Callable[[np.ndarray, np.ndarray], float] | None = None

    @property
    def name(self) -> str:
        return self.lift.name
