"""Pathological sequences x_i -> phi(y) with no converging lifts, and distances from y to fibers."""
import numpy as np
from scipy.optimize import linear_sum_assignment

from .constants import REGIME_TOL
from .models import PathologicalSequence
from ..cones.sets import NodalCubic
from ..numerics.service import (
    kernel_basis,
    numerical_rank,
    orthogonal_complement,
    range_basis,
    subspace_distance,
    svd,
)


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal(dim)
    return g / np.linalg.norm(g)


def _distinct_spectrum(values: np.ndarray) -> bool:
    """Nonzero with pairwise distinct entries."""
    values = np.sort(np.abs(values))
    if values.size == 0:
        return True
    if values[0] <= REGIME_TOL * max(1.0, float(values[-1])):
        return False
    return bool(np.all(np.diff(values) > REGIME_TOL * max(1.0, float(values[-1]))))


def _top_svd(x: np.ndarray, r: int):
    u, s, v = svd(x)
    return u[:, :r], s[:r], v[:, :r]


def _escape_vector(basis: np.ndarray, inside: np.ndarray) -> np.ndarray:
    """A unit vector of span(basis) orthogonal to span(inside), picked with the largest component."""
    comp = orthogonal_complement(inside, basis.shape[0]) if inside.shape[1] else np.eye(basis.shape[0])
    residual = comp @ (comp.T @ basis)
    u, _, _ = svd(residual)
    return u[:, 0]


# lr


def _lr_split(y, m, n, r):
    return y[:m * r].reshape(m, r), y[m * r:].reshape(n, r)


def _rank_raising_sequence(x: np.ndarray, factor: np.ndarray, r: int, label: str) -> PathologicalSequence:
    """x_i = x + (i sqrt(r - s))^{-1} N M^T of rank r whose column space misses part of col(factor)."""
    rows, cols = x.shape
    col_x = range_basis(x)
    s = col_x.shape[1]
    e = _escape_vector(range_basis(factor), col_x)
    blocked = np.column_stack([col_x, e])
    n_basis = orthogonal_complement(blocked, rows)[:, :r - s]
    m_basis = orthogonal_complement(range_basis(x.T), cols)[:, :r - s]
    scale = 1.0 / np.sqrt(r - s)

    def point(i: int) -> np.ndarray:
        return (x + (scale / i) * n_basis @ m_basis.T).reshape(-1)

    return PathologicalSequence(point=point, label=label)


def lr_sequence(y: np.ndarray, rng: np.random.Generator, m: int, n: int, r: int) -> PathologicalSequence | None:
    left, right = _lr_split(y, m, n, r)
    x = left @ right.T
    s = numerical_rank(x)
    if s < numerical_rank(left):
        return _rank_raising_sequence(x, left, r, "rank-r points avoiding col(L)")
    if s < numerical_rank(right):
        seq = _rank_raising_sequence(x.T, right, r, "rank-r points avoiding col(R)")
        return PathologicalSequence(
            point=lambda i: seq.point(i).reshape(n, m).T.reshape(-1),
            label=seq.label,
        )
    return None


def lr_fiber_distance(y: np.ndarray, x_new: np.ndarray, m: int, n: int, r: int) -> float:
    """Lower bound: a lift (L', R') of a rank-r point has col(L') = col(x') and col(R') = row(x')."""
    left, right = _lr_split(y, m, n, r)
    x_new = x_new.reshape(m, n)
    if numerical_rank(x_new) < r:
        return 0.0
    u, _, v = _top_svd(x_new, r)
    return float(max(
        np.linalg.norm(left - u @ (u.T @ left)),
        np.linalg.norm(right - v @ (v.T @ right)),
    ))


# desing


def desing_split(y, m, n, r):
    return y[:m * r].reshape(m, r), y[m * r:].reshape(r, n - r)


def desing_kernel(w: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Orthonormal basis of col(Pi^T [I; W]), the kernel carried by the chart point."""
    k = w.shape[1]
    return range_basis(pi.T @ np.vstack([np.eye(k), w]))


def desing_sequence(y: np.ndarray, rng: np.random.Generator, m: int, n: int, r: int,
                    pi: np.ndarray) -> PathologicalSequence | None:
    z, w = desing_split(y, m, n, r)
    x = np.hstack([-z @ w, z]) @ pi
    s = numerical_rank(z)
    if s == r:
        return None
    kernel = desing_kernel(w, pi)
    first = kernel @ _unit(rng, kernel.shape[1])
    row_x = range_basis(x.T)
    rest = orthogonal_complement(np.column_stack([row_x, first]), n)[:, :r - s - 1]
    v_perp = np.column_stack([first, rest])
    u_perp = orthogonal_complement(range_basis(x), m)[:, :r - s]
    scale = 1.0 / np.sqrt(r - s)

    def point(i: int) -> np.ndarray:
        return (x + (scale / i) * u_perp @ v_perp.T).reshape(-1)

    return PathologicalSequence(point=point, label="X + U_perp V_perp^T / i with V_perp meeting the chart kernel")


def desing_fiber_distance(y: np.ndarray, x_new: np.ndarray, m: int, n: int, r: int, pi: np.ndarray) -> float:
    """Distance in the total space {(X, S) : S in ker X}; at rank r the kernel of x' is forced."""
    z, w = desing_split(y, m, n, r)
    x = np.hstack([-z @ w, z]) @ pi
    x_new = x_new.reshape(m, n)
    if numerical_rank(x_new) < r:
        return 0.0
    gap = float(np.linalg.norm(x_new - x))
    return gap + subspace_distance(kernel_basis(x_new), desing_kernel(w, pi))


# svd


def svd_split(y, m, n, r):
    u = y[:m * r].reshape(m, r)
    sigma = y[m * r:m * r + r]
    v = y[m * r + r:].reshape(n, r)
    return u, sigma, v


def _givens(r: int, k: int, l: int) -> np.ndarray:
    g = np.eye(r)
    c = np.cos(np.pi / 4)
    g[k, k] = g[l, l] = c
    g[k, l], g[l, k] = -c, c
    return g


def _repeated_pair(values: np.ndarray) -> tuple[int, int] | None:
    mags = np.abs(values)
    scale = max(1.0, float(mags.max(initial=0.0)))
    for k in range(values.size):
        for l in range(k + 1, values.size):
            if abs(mags[k] - mags[l]) <= REGIME_TOL * scale:
                return k, l
    return None


def _zero_index(values: np.ndarray) -> int | None:
    scale = max(1.0, float(np.abs(values).max(initial=0.0)))
    hits = np.flatnonzero(np.abs(values) <= REGIME_TOL * scale)
    return int(hits[0]) if hits.size else None


def _swap_in(basis: np.ndarray, k: int) -> np.ndarray:
    """basis with column k replaced by a unit vector orthogonal to all of basis."""
    moved = basis.copy()
    moved[:, k] = orthogonal_complement(basis, basis.shape[0])[:, 0]
    return moved


def svd_sequence(y: np.ndarray, rng: np.random.Generator, m: int, n: int, r: int) -> PathologicalSequence | None:
    u, sigma, v = svd_split(y, m, n, r)
    zero = _zero_index(sigma)
    if zero is not None:
        u_new, v_new = _swap_in(u, zero), _swap_in(v, zero)
        label = f"column {zero} rotated out of span(U), span(V)"
    else:
        pair = _repeated_pair(sigma)
        if pair is None:
            return None
        signs = np.where(sigma < 0, -1.0, 1.0)
        g = _givens(r, *pair)
        u_new = u @ np.diag(signs) @ g @ np.diag(signs)
        v_new = v @ g
        label = f"pi/4 Givens rotation of columns {pair}"
    a = _unit(rng, r)

    def point(i: int) -> np.ndarray:
        return ((u_new * (sigma + a / (2 * i))) @ v_new.T).reshape(-1)

    return PathologicalSequence(point=point, label=label)


def svd_fiber_distance(y: np.ndarray, x_new: np.ndarray, m: int, n: int, r: int) -> float:
    """Exact distance to the fiber when x' has distinct nonzero singular values, else 0.

    The fiber is then the signed permutations of the thin SVD of x'.
    """
    u, sigma, v = svd_split(y, m, n, r)
    ut, st, vt = _top_svd(x_new.reshape(m, n), r)
    if st.size < r or not _distinct_spectrum(st):
        return 0.0
    cost = np.full((r, r), np.inf)
    for j in range(r):
        for k in range(r):
            for su in (1.0, -1.0):
                for sv in (1.0, -1.0):
                    c = (np.sum((u[:, j] - su * ut[:, k]) ** 2)
                         + np.sum((v[:, j] - sv * vt[:, k]) ** 2)
                         + (sigma[j] - su * sv * st[k]) ** 2)
                    cost[j, k] = min(cost[j, k], c)
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].sum()))


# msvd


def sym_from_coords(c: np.ndarray, r: int) -> np.ndarray:
    """Isometric coordinates on symmetric r-by-r matrices: diagonal, then off-diagonal pairs scaled by 1/sqrt(2)."""
    mat = np.zeros((r, r))
    for k, (a, b) in enumerate(zip(*np.triu_indices(r))):
        if a == b:
            mat[a, a] = c[k]
        else:
            mat[a, b] = mat[b, a] = c[k] / np.sqrt(2.0)
    return mat


def coords_from_sym(mat: np.ndarray) -> np.ndarray:
    r = mat.shape[0]
    return np.array([
        mat[a, a] if a == b else np.sqrt(2.0) * mat[a, b]
        for a, b in zip(*np.triu_indices(r))
    ])


def msvd_split(y, m, n, r):
    p = r * (r + 1) // 2
    u = y[:m * r].reshape(m, r)
    mid = sym_from_coords(y[m * r:m * r + p], r)
    v = y[m * r + p:].reshape(n, r)
    return u, mid, v


def _cancelling_pair(eig: np.ndarray) -> tuple[int, int] | None:
    scale = max(1.0, float(np.abs(eig).max(initial=0.0)))
    for k in range(eig.size):
        for l in range(k + 1, eig.size):
            if abs(eig[k] + eig[l]) <= REGIME_TOL * scale:
                return k, l
    return None


def _plane_rotation(a: np.ndarray, b: np.ndarray, dim: int) -> np.ndarray:
    """Quarter turn sending a to b in span(a, b), identity on its complement."""
    return np.eye(dim) - np.outer(a, a) - np.outer(b, b) + np.outer(b, a) - np.outer(a, b)


def msvd_sequence(y: np.ndarray, rng: np.random.Generator, m: int, n: int, r: int) -> PathologicalSequence | None:
    u, mid, v = msvd_split(y, m, n, r)
    eig, basis = np.linalg.eigh(mid)
    zero = _zero_index(eig)
    if zero is not None:
        left = _plane_rotation((u @ basis)[:, zero], orthogonal_complement(u, m)[:, 0], m)
        right = _plane_rotation((v @ basis)[:, zero], orthogonal_complement(v, n)[:, 0], n)
        a = _unit(rng, r)

        def point(i: int) -> np.ndarray:
            shifted = mid + basis @ np.diag(a / (2 * i)) @ basis.T
            return (left @ u @ shifted @ v.T @ right.T).reshape(-1)

        return PathologicalSequence(point=point, label=f"eigen-direction {zero} rotated out of span(U), span(V)")
    pair = _cancelling_pair(eig)
    if pair is None:
        return None
    k, l = pair
    skew = np.outer(basis[:, k], basis[:, l]) - np.outer(basis[:, l], basis[:, k])

    def point(i: int) -> np.ndarray:
        return (u @ (mid + skew / (2 * i)) @ v.T).reshape(-1)

    return PathologicalSequence(point=point, label=f"skew perturbation in the cancelling plane {pair}")


def msvd_fiber_distance(y: np.ndarray, x_new: np.ndarray, m: int, n: int, r: int) -> float:
    """Lower bound from the factor parts: lifts of x' are (U~ O, M', V~ D O) with D a sign matrix."""
    u, _, v = msvd_split(y, m, n, r)
    ut, st, vt = _top_svd(x_new.reshape(m, n), r)
    if st.size < r or not _distinct_spectrum(st):
        return 0.0
    stacked = np.vstack([u, v])
    best = np.inf
    for bits in range(2 ** r):
        signs = np.array([-1.0 if bits >> j & 1 else 1.0 for j in range(r)])
        cross = np.vstack([ut, vt * signs]).T @ stacked
        nuclear = float(np.sum(np.linalg.svd(cross, compute_uv=False)))
        best = min(best, float(np.sqrt(max(0.0, 4 * r - 2 * nuclear))))
    return best


# nodal cubic


def nodal_sequence(y: np.ndarray, rng: np.random.Generator) -> PathologicalSequence | None:
    if np.linalg.norm(y[:2]) > REGIME_TOL:
        return None
    other = -np.sign(y[2])

    def point(i: int) -> np.ndarray:
        return NodalCubic.at(other * (1.0 + 1.0 / (4 * i)))

    return PathologicalSequence(point=point, label="points on the other branch through the node")


def nodal_fiber_distance(y: np.ndarray, x_new: np.ndarray) -> float:
    x_new = np.asarray(x_new, dtype=float).reshape(-1)
    if abs(x_new[0]) > REGIME_TOL:
        return float(np.linalg.norm(np.array([x_new[0], x_new[1], x_new[1] / x_new[0]]) - y))
    return float(min(np.linalg.norm(np.array([0.0, 0.0, t]) - y) for t in (1.0, -1.0)))
