import numpy as np
from scipy import linalg

from .constants import SLOPE_NOISE_FACTOR
from .schemas import TolerancePolicy
from ..common.exceptions import InvalidInputException
from ..common.logger import get_logger

logger = get_logger(__name__)

DEFAULT_POLICY = TolerancePolicy()


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise InvalidInputException(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        logger.warning(f"Non-finite entries in {name}")
        raise InvalidInputException(f"{name} has non-finite entries")
    return arr


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def svd(a, full_matrices: bool = False) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Singular value decomposition ``A = U diag(s) V^T``.

    Returns ``(U, s, V)`` with ``s`` descending. ``V`` is returned untransposed.
    """
    arr = as_matrix(a)
    rows, cols = arr.shape
    if arr.size == 0:
        u = np.eye(rows) if full_matrices else np.zeros((rows, 0))
        v = np.eye(cols) if full_matrices else np.zeros((cols, 0))
        return u, np.zeros(0), v
    try:
        u, s, vt = linalg.svd(arr, full_matrices=full_matrices, lapack_driver="gesdd")
    except linalg.LinAlgError:
        logger.warning("gesdd did not converge, retrying with gesvd")
        u, s, vt = linalg.svd(arr, full_matrices=full_matrices, lapack_driver="gesvd")
    return u, s, vt.T


def rank_threshold(s: np.ndarray, shape: tuple[int, int], policy: TolerancePolicy | None = None) -> float:
    policy = policy or DEFAULT_POLICY
    if s.size == 0:
        return policy.zero_tol
    return max(policy.rank_tol_factor * float(s[0]) * max(shape), policy.zero_tol)


def numerical_rank(a, policy: TolerancePolicy | None = None) -> int:
    arr = as_matrix(a)
    _, s, _ = svd(arr)
    return int(np.sum(s > rank_threshold(s, arr.shape, policy)))


def range_basis(a, policy: TolerancePolicy | None = None) -> np.ndarray:
    arr = as_matrix(a)
    u, s, _ = svd(arr)
    rank = int(np.sum(s > rank_threshold(s, arr.shape, policy)))
    return u[:, :rank]


def kernel_basis(a, policy: TolerancePolicy | None = None) -> np.ndarray:
    arr = as_matrix(a)
    _, s, v = svd(arr, full_matrices=True)
    rank = int(np.sum(s > rank_threshold(s, arr.shape, policy)))
    return v[:, rank:]


def orthogonal_complement(basis: np.ndarray, dim: int, policy: TolerancePolicy | None = None) -> np.ndarray:
    basis = np.asarray(basis, dtype=float).reshape(dim, -1)
    if basis.shape[1] == 0:
        return np.eye(dim)
    return kernel_basis(basis.T, policy)


def projector(basis: np.ndarray) -> np.ndarray:
    basis = np.asarray(basis, dtype=float)
    return basis @ basis.T


def subspace_distance(basis_a: np.ndarray, basis_b: np.ndarray) -> float:
    """Spectral norm of the difference of the orthogonal projectors."""
    diff = projector(basis_a) - projector(basis_b)
    if diff.size == 0:
        return 0.0
    return float(np.linalg.norm(diff, 2))


def pinv(a, policy: TolerancePolicy | None = None) -> np.ndarray:
    arr = as_matrix(a)
    u, s, v = svd(arr)
    keep = s > rank_threshold(s, arr.shape, policy)
    return (v[:, keep] / s[keep]) @ u[:, keep].T


def sym_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues ascending and orthonormal eigenvectors of the symmetric part of ``a``."""
    arr = as_matrix(a)
    if arr.shape[0] != arr.shape[1]:
        raise InvalidInputException(f"sym_eig needs a square matrix, got {arr.shape}")
    if arr.size == 0:
        return np.zeros(0), np.zeros((0, 0))
    return linalg.eigh((arr + arr.T) / 2)


def min_eigenvalue(a) -> float:
    eigvals, _ = sym_eig(a)
    return float(eigvals[0]) if eigvals.size else 0.0


def min_norm_solve(a, b, policy: TolerancePolicy | None = None) -> np.ndarray:
    arr = as_matrix(a)
    rhs = np.asarray(b, dtype=float).reshape(-1)
    if rhs.shape[0] != arr.shape[0]:
        raise InvalidInputException(
            f"min_norm_solve: matrix has {arr.shape[0]} rows but right-hand side has {rhs.shape[0]}"
        )
    return pinv(arr, policy) @ rhs


def random_stiefel(n: int, k: int, rng) -> np.ndarray:
    rng = as_generator(rng)
    if k == 0:
        return np.zeros((n, 0))
    q, r = np.linalg.qr(rng.standard_normal((n, k)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def project_simplex(z: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    z = np.asarray(z, dtype=float)
    n = z.size
    u = np.sort(z)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, n + 1)
    cond = u - css / ind > 0
    rho = ind[cond][-1]
    theta = css[cond][-1] / float(rho)
    return np.maximum(z - theta, 0.0)


def loglog_slope(ts, residuals, scale: float = 1.0) -> float | None:
    """Least-squares slope of log(residual) against log(t).

    Residuals within a noise floor of ``scale`` are discarded; returns None when fewer
    than two usable points remain (the expansion is exact to rounding).
    """
    ts = np.asarray(ts, dtype=float)
    residuals = np.asarray(residuals, dtype=float)
    floor = SLOPE_NOISE_FACTOR * np.finfo(float).eps * max(scale, 1.0)
    keep = residuals > floor
    if np.count_nonzero(keep) < 2:
        return None
    slope, _ = np.polyfit(np.log(ts[keep]), np.log(residuals[keep]), 1)
    return float(slope)
