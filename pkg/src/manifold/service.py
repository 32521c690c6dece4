import numpy as np

from .constants import (
    GAUSS_NEWTON_ACCEPT,
    GAUSS_NEWTON_MAX_ITERS,
    GAUSS_NEWTON_TARGET,
    ON_MANIFOLD_TOL,
    RANK_CHECK_POINTS,
    RANK_CHECK_STEP,
    SECOND_ORDER_TOL,
)
from .models import ChartDomain, Embedded, ManifoldDesc, Product
from ..common.exceptions import (
    ConstantRankViolationException,
    InvalidInputException,
    RetractionFailureException,
)
from ..common.logger import get_logger
from ..numerics.schemas import TolerancePolicy
from ..numerics.service import (
    as_generator,
    kernel_basis,
    min_norm_solve,
    rank_threshold,
    svd,
)

logger = get_logger(__name__)


def _as_point(M: ManifoldDesc, y) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != M.ambient_dim:
        raise InvalidInputException(f"Expected {M.ambient_dim} coordinates, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise InvalidInputException("Point has non-finite coordinates")
    return y


def constraint_scale(y: np.ndarray) -> float:
    return max(1.0, float(y @ y))


def is_on_manifold(M: ManifoldDesc, y, tol: float = ON_MANIFOLD_TOL) -> bool:
    y = _as_point(M, y)
    h = M.constraint(y)
    return h.size == 0 or float(np.linalg.norm(h)) <= tol * constraint_scale(y)


def require_on_manifold(M: ManifoldDesc, y, tol: float = ON_MANIFOLD_TOL) -> np.ndarray:
    y = _as_point(M, y)
    if not is_on_manifold(M, y, tol):
        residual = float(np.linalg.norm(M.constraint(y)))
        logger.warning(f"Point off manifold: |h(y)| = {residual:.3e}")
        raise InvalidInputException(f"Point is not on the manifold (|h(y)| = {residual:.3e})")
    return y


def checked_jacobian(M: ManifoldDesc, y: np.ndarray, policy: TolerancePolicy | None = None) -> np.ndarray:
    """Dh(y), after confirming its numerical rank equals the declared codimension."""
    jac = M.constraint_jacobian(y)
    if jac.shape[0] == 0:
        return jac
    _, s, _ = svd(jac)
    rank = int(np.sum(s > rank_threshold(s, jac.shape, policy)))
    if rank != M.codim:
        logger.warning(f"Rank of Dh is {rank}, declared {M.codim}")
        raise ConstantRankViolationException(
            f"Dh(y) has numerical rank {rank} but the manifold declares {M.codim}"
        )
    return jac


def tangent_basis(M: ManifoldDesc, y, policy: TolerancePolicy | None = None) -> np.ndarray:
    """Orthonormal basis of T_yM in ambient coordinates, one column per direction."""
    y = _as_point(M, y)
    if isinstance(M, ChartDomain):
        return np.eye(M.dimension)
    if isinstance(M, Product):
        blocks = [tangent_basis(f, p, policy) for f, p in zip(M.factors, M.split(y))]
        basis = np.zeros((M.ambient_dim, sum(b.shape[1] for b in blocks)))
        col = 0
        for block, start, stop in zip(blocks, M.offsets[:-1], M.offsets[1:]):
            basis[start:stop, col:col + block.shape[1]] = block
            col += block.shape[1]
        return basis
    return kernel_basis(checked_jacobian(M, y, policy), policy)


def project_tangent(M: ManifoldDesc, y, z, policy: TolerancePolicy | None = None) -> np.ndarray:
    basis = tangent_basis(M, y, policy)
    return basis @ (basis.T @ np.asarray(z, dtype=float).reshape(-1))


def second_order_correction(M: ManifoldDesc, y, v, policy: TolerancePolicy | None = None) -> np.ndarray:
    """Minimum-norm u with Dh(y)[u] = -D^2h(y)[v, v]."""
    y = _as_point(M, y)
    v = np.asarray(v, dtype=float).reshape(-1)
    if isinstance(M, ChartDomain):
        return np.zeros_like(y)
    if isinstance(M, Product):
        return np.concatenate([
            second_order_correction(f, p, q, policy)
            for f, p, q in zip(M.factors, M.split(y), M.split(v))
        ])
    jac = checked_jacobian(M, y, policy)
    return min_norm_solve(jac, -M.constraint_curvature(y, v), policy)


def second_order_residual(M: ManifoldDesc, y, v, u) -> float:
    y = np.asarray(y, dtype=float).reshape(-1)
    jac = M.constraint_jacobian(y)
    if jac.shape[0] == 0:
        return 0.0
    return float(np.linalg.norm(jac @ u + M.constraint_curvature(y, v)))


def _gauss_newton(M: ManifoldDesc, z: np.ndarray, policy: TolerancePolicy | None) -> np.ndarray:
    best, best_norm = z, np.inf
    for _ in range(GAUSS_NEWTON_MAX_ITERS):
        h = M.constraint(z)
        h_norm = float(np.linalg.norm(h))
        if h_norm < best_norm:
            best, best_norm = z, h_norm
        if h_norm <= GAUSS_NEWTON_TARGET * constraint_scale(z):
            break
        z = z - min_norm_solve(M.constraint_jacobian(z), h, policy)
        if not np.all(np.isfinite(z)):
            break
    if best_norm > GAUSS_NEWTON_ACCEPT * constraint_scale(best):
        logger.warning(f"Gauss-Newton projection stalled at |h| = {best_norm:.3e}")
        raise RetractionFailureException(
            f"Projection onto the manifold stalled at |h| = {best_norm:.3e}"
        )
    return best


def pull_back(M: ManifoldDesc, z, policy: TolerancePolicy | None = None) -> np.ndarray:
    """Project an ambient point back onto M (closed form where known, Gauss-Newton otherwise)."""
    z = _as_point(M, z)
    if isinstance(M, Product):
        return np.concatenate([pull_back(f, p, policy) for f, p in zip(M.factors, M.split(z))])
    closest = M.closest_point(z)
    if closest is not None:
        return closest
    return _gauss_newton(M, z, policy)


def curve(
        M: ManifoldDesc,
        y,
        v,
        u,
        t: float,
        policy: TolerancePolicy | None = None,
) -> np.ndarray:
    """Point c(t) on M with c(0) = y, c'(0) = v and c''(0) = u + (normal part), via projection."""
    y = _as_point(M, y)
    v = np.asarray(v, dtype=float).reshape(-1)
    if u is None:
        u = second_order_correction(M, y, v, policy)
    else:
        u = np.asarray(u, dtype=float).reshape(-1)
        residual = second_order_residual(M, y, v, u)
        if residual > SECOND_ORDER_TOL * max(1.0, float(v @ v)):
            raise InvalidInputException(
                f"u is not a second-order tangent for v (residual {residual:.3e})"
            )
    if t == 0.0:
        return y.copy()
    return pull_back(M, y + t * v + 0.5 * t * t * u, policy)


def check_constant_rank(M: ManifoldDesc, y, seed=0, policy: TolerancePolicy | None = None) -> int:
    """Rank of Dh at y and at a few nearby points on M; raise if they disagree."""
    y = _as_point(M, y)
    rank = M.codim
    checked_jacobian(M, y, policy)
    basis = tangent_basis(M, y, policy)
    if basis.shape[1] == 0 or M.codim == 0:
        return rank
    rng = as_generator(seed)
    for _ in range(RANK_CHECK_POINTS):
        direction = basis @ rng.standard_normal(basis.shape[1])
        direction /= np.linalg.norm(direction)
        neighbor = curve(M, y, direction, None, RANK_CHECK_STEP, policy)
        checked_jacobian(M, neighbor, policy)
    return rank


def random_point(M: ManifoldDesc, seed=0, policy: TolerancePolicy | None = None) -> np.ndarray:
    rng = as_generator(seed)
    sample = M.sample(rng)
    if sample is not None:
        return np.asarray(sample, dtype=float).reshape(-1)
    logger.debug(f"No sampler for {M.kind.value} manifold, projecting a Gaussian point")
    return pull_back(M, rng.standard_normal(M.ambient_dim), policy)


def random_tangent(M: ManifoldDesc, y, seed=0, policy: TolerancePolicy | None = None) -> np.ndarray:
    basis = tangent_basis(M, y, policy)
    if basis.shape[1] == 0:
        raise InvalidInputException("Tangent space is zero-dimensional")
    rng = as_generator(seed)
    v = basis @ rng.standard_normal(basis.shape[1])
    return v / np.linalg.norm(v)


def desing_total_space(m: int, n: int, r: int) -> Embedded:
    """{(X, Y) : XY = 0, Y^T Y = I} with X m-by-n of rank <= r and Y n-by-(n-r), flattened as (vec X, vec Y)."""
    k = n - r
    if r < 0 or k <= 0:
        raise InvalidInputException(f"Invalid desingularization dimensions m={m}, n={n}, r={r}")
    iu = np.triu_indices(k)
    size_x, size_y = m * n, n * k

    def split(z):
        return z[:size_x].reshape(m, n), z[size_x:].reshape(n, k)

    def h(z):
        x, yy = split(z)
        return np.concatenate([(x @ yy).reshape(-1), (yy.T @ yy - np.eye(k))[iu]])

    def dh(z):
        x, yy = split(z)
        jac = np.zeros((m * k + iu[0].size, size_x + size_y))
        for col in range(size_x + size_y):
            e = np.zeros(size_x + size_y)
            e[col] = 1.0
            dx, dy = split(e)
            jac[:m * k, col] = (dx @ yy + x @ dy).reshape(-1)
            jac[m * k:, col] = (dy.T @ yy + yy.T @ dy)[iu]
        return jac

    def d2h(z, v):
        dx, dy = split(v)
        return np.concatenate([(2.0 * dx @ dy).reshape(-1), (2.0 * dy.T @ dy)[iu]])

    def sampler(rng):
        yy = np.linalg.qr(rng.standard_normal((n, k)))[0]
        complement = np.linalg.qr(np.hstack([yy, rng.standard_normal((n, r))]))[0][:, k:]
        x = rng.standard_normal((m, r)) @ complement.T
        return np.concatenate([x.reshape(-1), yy.reshape(-1)])

    return Embedded(
        ambient=size_x + size_y,
        h=h,
        dh=dh,
        d2h=d2h,
        rank=m * k + iu[0].size,
        sampler=sampler,
        label=f"desing_total_space({m},{n},{r})",
    )
