import inspect

import numpy as np

from .builders import BUILDERS, as_preimage
from .constants import DEFAULT_PARAMS, EntryId
from .models import CatalogEntry, PathologicalSequence
from ..checker.constants import Property
from ..common.exceptions import (
    InvalidInputException,
    NoDegeneracyException,
    NoPathologyException,
)
from ..common.logger import get_logger
from ..cones.sets import Preimage
from ..lift.models import DegenerateDirection
from ..manifold.service import require_on_manifold
from ..numerics.service import as_generator

logger = get_logger(__name__)


def _entry_id(entry_id) -> EntryId:
    try:
        return EntryId(entry_id)
    except ValueError:
        logger.warning(f"Unknown catalog entry {entry_id}")
        raise InvalidInputException(
            f"Unknown catalog entry {entry_id!r}; expected one of {[e.value for e in EntryId]}"
        )


def build(entry_id, **params) -> CatalogEntry:
    """Catalog entry by id; params override the entry's defaults."""
    key = _entry_id(entry_id)
    builder = BUILDERS[key]
    accepted = set(inspect.signature(builder).parameters)
    unknown = set(params) - accepted
    if unknown:
        logger.warning(f"Unknown parameters {sorted(unknown)} for {key.value}")
        raise InvalidInputException(f"{key.value} does not take parameters {sorted(unknown)}")
    merged = {**DEFAULT_PARAMS[key], **{k: v for k, v in params.items() if v is not None}}
    entry = builder(**merged)
    logger.debug(f"Built catalog entry {entry.name}")
    return entry


def list_entries() -> list[dict]:
    """Ids, regime names and default parameters of every entry."""
    listing = []
    for key in EntryId:
        entry = build(key)
        listing.append({"id": key.value, "regimes": regimes(entry), "defaults": DEFAULT_PARAMS[key]})
    return listing


def regimes(entry: CatalogEntry) -> list[str]:
    return list(entry.regimes)


def preimage_set(entry: CatalogEntry) -> Preimage:
    """The entry's set as F^{-1}(orthant) for the ball and annulus fiber products."""
    return as_preimage(entry)


def sample_point(entry: CatalogEntry, regime: str, rng=None) -> np.ndarray:
    if regime not in entry.regimes:
        logger.warning(f"Regime {regime} not defined for {entry.name}")
        raise InvalidInputException(
            f"Regime {regime!r} not defined for {entry.id.value}; expected one of {regimes(entry)}"
        )
    y = entry.regimes[regime](as_generator(rng))
    return require_on_manifold(entry.lift.manifold, y)


def expected_verdicts(entry: CatalogEntry, y) -> dict[Property, bool | None]:
    """The classification of y; None where the entry's result does not decide the property."""
    y = np.asarray(y, dtype=float).reshape(-1)
    verdicts = {prop: predicate(y) for prop, predicate in entry.expected.items()}
    return {prop: None if value is None else bool(value) for prop, value in verdicts.items()}


def _family(entry: CatalogEntry, y) -> list[DegenerateDirection]:
    family = entry.lift.degenerate_family(np.asarray(y, dtype=float).reshape(-1)) \
        if entry.lift.degenerate_family is not None else []
    if not family:
        logger.warning(f"No degenerate directions for {entry.name} at this point")
        raise NoDegeneracyException(f"{entry.name} has no degenerate directions at this point")
    return family


def degenerate_directions(entry: CatalogEntry, y, i: int, which: int = 0) -> np.ndarray:
    """Element v_i of a tangent sequence with L(v_i) -> 0 at rate 1/i and constant Q(v_i)."""
    if i < 1:
        raise InvalidInputException(f"Sequence index must be positive, got {i}")
    family = _family(entry, y)
    if not 0 <= which < len(family):
        raise InvalidInputException(f"Direction {which} out of range for {len(family)} directions")
    return family[which].direction(i)


def degenerate_targets(entry: CatalogEntry, y) -> np.ndarray:
    """Constant limits Q(v_i) of the degenerate family, one per row."""
    return np.stack([item.target for item in _family(entry, y)])


def pathological_sequence(entry: CatalogEntry, y, seed=0) -> PathologicalSequence:
    y = np.asarray(y, dtype=float).reshape(-1)
    sequence = entry.pathology(y, as_generator(seed)) if entry.pathology is not None else None
    if sequence is None:
        logger.warning(f"{entry.name} is open at the queried point")
        raise NoPathologyException(f"{entry.name} is open at this point; no pathological sequence")
    return sequence


def fiber_distance(entry: CatalogEntry, y, x_new) -> float:
    """Distance from y to the fiber over x_new (a lower bound where the fiber is not explicit)."""
    if entry.fiber_distance is None:
        raise InvalidInputException(f"{entry.name} has no fiber parametrization")
    y = np.asarray(y, dtype=float).reshape(-1)
    return float(entry.fiber_distance(y, np.asarray(x_new, dtype=float).reshape(-1)))
