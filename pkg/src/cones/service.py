import numpy as np

from .constants import EMPIRICAL_ATTEMPTS_FACTOR, MEMBER_TOL, SAMPLE_MEMBER_TOL
from .models import Subspace, TangentCone
from .schemas import Membership
from .sets import SetDesc
from ..common.exceptions import InvalidInputException, SamplerExhaustedException
from ..common.logger import get_logger
from ..config import settings
from ..numerics.schemas import TolerancePolicy
from ..numerics.service import DEFAULT_POLICY, as_generator

logger = get_logger(__name__)


def _as_vector(cone_or_set, v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    dim = cone_or_set.dim if hasattr(cone_or_set, "dim") else cone_or_set.ambient_dim
    if v.size != dim:
        raise InvalidInputException(f"Expected a vector of length {dim}, got {v.size}")
    return v


def require_feasible(set_desc: SetDesc, x) -> np.ndarray:
    x = _as_vector(set_desc, x)
    if not set_desc.is_feasible(x):
        residual = set_desc.residual(x)
        logger.warning(f"Point outside {set_desc.kind.value}: residual {residual:.3e}")
        raise InvalidInputException(
            f"Point is not in the {set_desc.kind.value} set (residual {residual:.3e})"
        )
    return x


def cone_at(set_desc: SetDesc, x, policy: TolerancePolicy | None = None) -> TangentCone:
    """Closed-form tangent cone of set_desc at x; a Subspace whenever the cone is linear."""
    policy = policy or DEFAULT_POLICY
    x = require_feasible(set_desc, x)
    return set_desc.tangent_cone(x, policy)


def member(cone: TangentCone, v, tol: float = MEMBER_TOL) -> Membership:
    v = _as_vector(cone, v)
    violation = max(float(cone.violation(v)), 0.0)
    return Membership(inside=violation <= tol, violation=violation)


def stationarity_gap(cone: TangentCone, w) -> float:
    """inf <w, v> over unit v in the cone; zero exactly when w is in the dual cone."""
    return min(float(cone.gap(_as_vector(cone, w))), 0.0)


def is_linear(cone: TangentCone) -> bool:
    return isinstance(cone, Subspace)


def sample_directions(cone: TangentCone, k: int, seed=0) -> list[np.ndarray]:
    """Up to k unit members of the cone; none when the cone is {0}."""
    if k < 1:
        raise InvalidInputException("k must be at least 1")
    rng = as_generator(seed)
    directions = []
    for _ in range(EMPIRICAL_ATTEMPTS_FACTOR * k):
        if len(directions) == k:
            break
        v = cone.sample(rng)
        if v is None:
            continue
        if cone.violation(v) <= SAMPLE_MEMBER_TOL:
            directions.append(v)
    if not directions:
        logger.debug(f"No unit directions in {cone.kind.value} cone")
    return directions


def empirical_tangents(set_desc: SetDesc, x, k: int, seed=0,
                       radius: float | None = None) -> list[np.ndarray]:
    """Normalized secants (x_i - x)/|x_i - x| from feasible points within radius of x."""
    radius = radius or settings.EMPIRICAL_RADIUS
    x = require_feasible(set_desc, x)
    rng = as_generator(seed)
    directions = []
    for _ in range(EMPIRICAL_ATTEMPTS_FACTOR * k):
        if len(directions) == k:
            return directions
        near = set_desc.sample_near(x, radius, rng)
        if near is None or not set_desc.is_feasible(near):
            continue
        diff = np.asarray(near, dtype=float).reshape(-1) - x
        dist = float(np.linalg.norm(diff))
        if 0.0 < dist <= radius and dist > 1e-6 * radius:
            directions.append(diff / dist)
    if len(directions) == k:
        return directions
    logger.warning(f"Sampler for {set_desc.kind.value} produced {len(directions)} of {k} tangents")
    raise SamplerExhaustedException(
        f"Only {len(directions)} of {k} empirical tangents found near the point"
    )
