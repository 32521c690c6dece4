import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from src.common.exceptions import InvalidInputException
from src.numerics.service import (
    kernel_basis,
    loglog_slope,
    min_eigenvalue,
    min_norm_solve,
    numerical_rank,
    orthogonal_complement,
    pinv,
    project_simplex,
    random_stiefel,
    range_basis,
    subspace_distance,
    svd,
)


def test_svd_returns_untransposed_v(rng):
    a = rng.standard_normal((5, 3))
    u, s, v = svd(a)
    assert np.allclose(u @ np.diag(s) @ v.T, a)
    assert np.all(np.diff(s) <= 0)


def test_rank_kernel_and_range_are_consistent(rng):
    a = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 5))
    assert numerical_rank(a) == 2
    ker = kernel_basis(a)
    assert ker.shape == (5, 3)
    assert np.allclose(a @ ker, 0.0, atol=1e-10)
    im = range_basis(a)
    assert im.shape == (6, 2)
    assert np.allclose(im.T @ im, np.eye(2))


def test_orthogonal_complement_of_empty_basis_is_identity():
    assert np.allclose(orthogonal_complement(np.zeros((4, 0)), 4), np.eye(4))


def test_subspace_distance_ignores_basis_choice(rng):
    q = random_stiefel(5, 2, rng)
    mixed = q @ np.array([[0.0, 1.0], [1.0, 0.0]])
    assert subspace_distance(q, mixed) < 1e-12
    assert subspace_distance(q, random_stiefel(5, 2, rng)) > 1e-3


def test_pinv_and_min_norm_solve(rng):
    a = rng.standard_normal((3, 5))
    b = rng.standard_normal(3)
    x = min_norm_solve(a, b)
    assert np.allclose(a @ x, b)
    assert np.allclose(pinv(a), np.linalg.pinv(a))


def test_min_norm_solve_rejects_mismatched_rhs(rng):
    with pytest.raises(InvalidInputException):
        min_norm_solve(rng.standard_normal((3, 2)), np.ones(4))


def test_non_finite_matrix_is_rejected():
    with pytest.raises(InvalidInputException):
        numerical_rank(np.array([[1.0, np.nan]]))


def test_min_eigenvalue_uses_symmetric_part():
    assert min_eigenvalue(np.array([[1.0, 4.0], [0.0, 1.0]])) == pytest.approx(-1.0)


@settings(max_examples=50)
@given(st.lists(st.floats(min_value=-10, max_value=10), min_size=1, max_size=8))
def test_project_simplex_lands_on_simplex(values):
    p = project_simplex(np.array(values))
    assert np.all(p >= 0.0)
    assert p.sum() == pytest.approx(1.0)


def test_loglog_slope_recovers_power():
    ts = np.array([1e-1, 1e-2, 1e-3])
    assert loglog_slope(ts, 3.0 * ts ** 2) == pytest.approx(2.0)


def test_loglog_slope_is_none_below_noise_floor():
    assert loglog_slope([1e-1, 1e-2, 1e-3], [0.0, 0.0, 1e-20]) is None


def _conditioned(m: int, n: int, rank: int, seed: int) -> np.ndarray:
    """m-by-n matrix of exact rank `rank` with nonzero singular values in [0.5, 2]."""
    rng = np.random.default_rng(seed)
    u, v = random_stiefel(m, rank, rng), random_stiefel(n, rank, rng)
    return (u * rng.uniform(0.5, 2.0, size=rank)) @ v.T


@settings(max_examples=60, deadline=None)
@given(
    st.integers(min_value=1, max_value=8),
    st.integers(min_value=1, max_value=8),
    st.integers(min_value=0, max_value=8),
    st.integers(min_value=0, max_value=2 ** 32 - 1),
)
def test_pinv_satisfies_penrose_identities(m, n, rank, seed):
    a = _conditioned(m, n, min(rank, m, n), seed)
    p = pinv(a)
    assert p.shape == (n, m)
    assert np.linalg.norm(a @ p @ a - a) <= 1e-10
    assert np.linalg.norm(p @ a @ p - p) <= 1e-10
    assert np.linalg.norm((a @ p).T - a @ p) <= 1e-10
    assert np.linalg.norm((p @ a).T - p @ a) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(
    st.integers(min_value=1, max_value=30),
    st.integers(min_value=1, max_value=30),
    st.integers(min_value=0, max_value=2 ** 32 - 1),
)
def test_svd_residual_is_at_rounding_level(m, n, seed):
    a = np.random.default_rng(seed).standard_normal((m, n))
    u, s, v = svd(a)
    assert u.shape == (m, min(m, n)) and v.shape == (n, min(m, n))
    assert np.linalg.norm((u * s) @ v.T - a, 2) <= 1e-12 * np.linalg.norm(a, 2)
    assert np.allclose(u.T @ u, np.eye(min(m, n)), atol=1e-12)
    assert np.allclose(v.T @ v, np.eye(min(m, n)), atol=1e-12)
