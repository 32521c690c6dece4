import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from src.common.exceptions import ConstantRankViolationException, InvalidInputException
from src.manifold.models import ChartDomain, Embedded, Product, Sphere, Stiefel
from src.manifold.service import (
    check_constant_rank,
    curve,
    desing_total_space,
    is_on_manifold,
    project_tangent,
    pull_back,
    random_point,
    random_tangent,
    require_on_manifold,
    second_order_correction,
    second_order_residual,
    tangent_basis,
)


def test_sphere_tangent_basis_is_orthogonal_to_point():
    M = Sphere(2)
    y = np.array([0.0, 0.6, 0.8])
    basis = tangent_basis(M, y)
    assert basis.shape == (3, 2)
    assert np.allclose(basis.T @ y, 0.0)
    assert np.allclose(basis.T @ basis, np.eye(2))


def test_off_manifold_point_is_rejected():
    with pytest.raises(InvalidInputException):
        require_on_manifold(Sphere(2), np.array([1.0, 1.0, 0.0]))


def test_wrong_length_point_is_rejected():
    with pytest.raises(InvalidInputException):
        is_on_manifold(Sphere(2), np.ones(4))


def test_pull_back_normalizes_onto_sphere():
    assert np.allclose(pull_back(Sphere(1), np.array([3.0, 4.0])), [0.6, 0.8])


def test_stiefel_sample_and_projection(rng):
    M = Stiefel(4, 2)
    y = random_point(M, rng)
    assert is_on_manifold(M, y)
    assert tangent_basis(M, y).shape == (8, 8 - 3)
    z = y + 1e-3 * rng.standard_normal(8)
    assert is_on_manifold(M, pull_back(M, z))


def test_second_order_correction_satisfies_curvature_equation(rng):
    M = Stiefel(3, 2)
    y = random_point(M, rng)
    v = random_tangent(M, y, seed=rng)
    u = second_order_correction(M, y, v)
    assert second_order_residual(M, y, v, u) < 1e-10


def test_curve_stays_on_manifold_with_second_order_accuracy():
    M = Sphere(2)
    y = np.array([1.0, 0.0, 0.0])
    v = np.array([0.0, 1.0, 0.0])
    u = second_order_correction(M, y, v)
    for t in (1e-1, 1e-2):
        c = curve(M, y, v, None, t)
        assert is_on_manifold(M, c)
        assert np.linalg.norm(c - y - t * v - 0.5 * t * t * u) <= 10 * t ** 3


def test_curve_rejects_bad_second_order_term():
    M = Sphere(2)
    y = np.array([1.0, 0.0, 0.0])
    with pytest.raises(InvalidInputException):
        curve(M, y, np.array([0.0, 1.0, 0.0]), np.zeros(3), 0.1)


def test_chart_domain_is_flat(rng):
    M = ChartDomain(3)
    y = rng.standard_normal(3)
    assert np.allclose(tangent_basis(M, y), np.eye(3))
    assert np.allclose(second_order_correction(M, y, np.ones(3)), 0.0)


def test_product_stacks_factor_tangent_spaces():
    M = Product((Sphere(1), ChartDomain(2)))
    y = np.array([0.0, 1.0, 5.0, -2.0])
    basis = tangent_basis(M, y)
    assert basis.shape == (4, 3)
    assert np.allclose(basis[:2, 0], [1.0, 0.0]) or np.allclose(basis[:2, 0], [-1.0, 0.0])


def test_rank_drop_is_detected():
    # h(y) = y_1^2 has a rank drop at the origin
    M = Embedded(
        ambient=2,
        h=lambda y: np.array([y[0] ** 2]),
        dh=lambda y: np.array([[2.0 * y[0], 0.0]]),
        d2h=lambda y, v: np.array([2.0 * v[0] ** 2]),
        rank=1,
    )
    with pytest.raises(ConstantRankViolationException):
        check_constant_rank(M, np.zeros(2))


def test_desing_total_space_samples_satisfy_constraints(rng):
    M = desing_total_space(3, 4, 2)
    y = random_point(M, rng)
    assert is_on_manifold(M, y)
    assert check_constant_rank(M, y) == M.codim


def test_desing_total_space_rejects_full_rank():
    with pytest.raises(InvalidInputException):
        desing_total_space(3, 4, 4)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_sphere_projection_kills_the_normal_and_is_idempotent(n, seed):
    M = Sphere(n)
    rng = np.random.default_rng(seed)
    y = random_point(M, rng)
    assert np.allclose(project_tangent(M, y, y), 0.0, atol=1e-12)
    z = rng.standard_normal(n + 1)
    once = project_tangent(M, y, z)
    assert abs(once @ y) <= 1e-12 * max(1.0, float(np.linalg.norm(z)))
    assert np.allclose(project_tangent(M, y, once), once, atol=1e-12)
