import numpy as np
import pytest

from src.catalog.constants import EntryId
from src.catalog.service import build, regimes, sample_point
from src.common.exceptions import InvalidInputException, NotConvergedException
from src.cones.service import cone_at
from src.cones.sets import Ball, NodalCubic, ProductSet, Simplex
from src.lift.service import lq
from src.numerics.schemas import TolerancePolicy
from src.optimize.constants import HessianSource, StopReason
from src.optimize.costs import (
    constant,
    linear,
    quadratic,
    quadratic_shift,
    random_convex_quadratic,
    random_quadratic_quartic,
)
from src.optimize.schemas import SolverParams
from src.optimize.service import (
    downstream_stationarity,
    find_second_order_point,
    fd_validate,
    grad_g,
    hess_g,
    hess_g_fd,
    objective,
    projected_gradient_oracle,
    projection_for,
)

WEIGHTS = np.array([3.0, 1.0, 2.0, 5.0])
CENTER = np.full(4, 0.5)


def test_cost_oracles_agree():
    a = np.array([[2.0, 1.0], [1.0, 3.0]])
    cost = quadratic(a, b=[1.0, -1.0], c=0.5)
    x = np.array([1.0, 2.0])
    assert cost(x) == pytest.approx(0.5 * x @ a @ x + (1.0 - 2.0) + 0.5)
    assert np.allclose(cost.gradient(x), a @ x + [1.0, -1.0])
    assert constant(2, 4.0)(x) == 4.0


def test_quadratic_shift_rejects_mismatched_center():
    with pytest.raises(InvalidInputException):
        quadratic_shift([1.0, 0.0], 1.0, [0.0, 0.0, 0.0])


def test_grad_g_matches_directional_derivative():
    lift = build("hadamard", n=4).lift
    cost = linear(WEIGHTS)
    data = lq(lift, CENTER)
    coords = np.array([0.3, -0.2, 0.9])
    coords /= np.linalg.norm(coords)
    t = 1e-6
    moved = CENTER + t * data.lift_coords(coords)
    moved /= np.linalg.norm(moved)
    slope = (objective(lift, cost, moved) - objective(lift, cost, CENTER)) / t
    assert grad_g(lift, CENTER, cost, data) @ coords == pytest.approx(slope, abs=1e-5)


def test_hess_g_at_sphere_critical_point():
    lift = build("hadamard", n=4).lift
    y = np.array([0.0, 1.0, 0.0, 0.0])
    eig = np.sort(np.linalg.eigvalsh(hess_g(lift, y, linear(WEIGHTS))))
    assert np.allclose(eig, [2.0, 4.0, 8.0])
    assert np.allclose(np.sort(np.linalg.eigvalsh(hess_g_fd(lift, y, linear(WEIGHTS)))), eig, atol=1e-5)


def test_fd_validate_accepts_closed_form_derivatives():
    lift = build("hadamard", n=4).lift
    report = fd_validate(lift, random_quadratic_quartic(4, seed=1), CENTER, seed=2)
    assert report.passed
    assert report.hessian_source == HessianSource.CLOSED_FORM


def test_fd_validate_on_chart_lift(rng):
    entry = build("lr", m=3, n=3, r=2)
    y = sample_point(entry, "full_rank", rng)
    assert fd_validate(entry.lift, random_quadratic_quartic(9, seed=3), y, seed=4).passed


def test_solver_finds_smallest_weight():
    lift = build("hadamard", n=4).lift
    y, certificate = find_second_order_point(lift, linear(WEIGHTS), CENTER, SolverParams(seed=5))
    assert certificate.stop_reason == StopReason.CONVERGED
    assert certificate.value == pytest.approx(1.0, abs=1e-6)
    assert certificate.hess_min_eig >= -1e-7
    assert abs(y[1]) == pytest.approx(1.0, abs=1e-6)


def test_solver_escapes_saddle():
    lift = build("hadamard", n=4).lift
    saddle = np.array([0.0, 0.0, 1.0, 0.0])
    _, certificate = find_second_order_point(lift, linear(WEIGHTS), saddle, SolverParams(seed=6))
    assert certificate.value == pytest.approx(1.0, abs=1e-6)
    assert certificate.negative_curvature_steps + certificate.perturbations >= 1


def test_solver_reports_best_point_when_out_of_iterations():
    lift = build("hadamard", n=4).lift
    with pytest.raises(NotConvergedException) as info:
        find_second_order_point(lift, linear(WEIGHTS), CENTER, SolverParams(max_iters=1))
    assert info.value.certificate.stop_reason == StopReason.MAX_ITERS
    assert info.value.best_point is not None


def test_eigen_simplex_solution_matches_projected_gradient():
    entry = build("eigen_simplex", n=5, seed=3)
    cost = linear(np.arange(1.0, 6.0))
    y0 = sample_point(entry, "interior", 7)
    y, certificate = find_second_order_point(entry.lift, cost, y0, SolverParams(seed=8))
    _, oracle = projected_gradient_oracle(cost, entry.set_desc, np.full(5, 0.2), 1.0)
    assert oracle == pytest.approx(1.0, abs=1e-9)
    assert certificate.value == pytest.approx(oracle, abs=1e-6)
    cone = cone_at(entry.set_desc, entry.lift.phi(y))
    assert downstream_stationarity(entry.lift, cost, y, cone) >= -1e-6


def test_projection_for_unsupported_set():
    assert projection_for(Simplex(3))(np.array([2.0, 0.0, 0.0])) == pytest.approx([1.0, 0.0, 0.0])
    with pytest.raises(InvalidInputException):
        projection_for(NodalCubic())


@pytest.mark.parametrize("seed", range(20))
def test_eigen_simplex_reaches_smallest_eigenvalue(seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((8, 8))
    a = 0.5 * (g + g.T)
    eigvals, eigvecs = np.linalg.eigh(a)
    entry = build("eigen_simplex", n=8, u=eigvecs)
    cost = linear(eigvals)
    for start in range(5):
        y0 = sample_point(entry, "interior", rng)
        y, certificate = find_second_order_point(entry.lift, cost, y0, SolverParams(seed=start))
        assert certificate.stop_reason == StopReason.CONVERGED
        assert certificate.value == pytest.approx(eigvals[0], abs=1e-6)
        assert float(y @ a @ y) == pytest.approx(eigvals[0], abs=1e-6)


# the solver stops at |grad| <= 1e-9, so inactive coordinates of x settle near (1e-9 / multiplier)^2
SOLVER_FACE_POLICY = TolerancePolicy(zero_tol=1e-8)


@pytest.mark.parametrize("seed", range(100))
def test_hadamard_solution_is_stationary_on_the_simplex(seed):
    entry = build("hadamard", n=10)
    cost = random_convex_quadratic(10, seed=seed)
    y0 = sample_point(entry, "interior", seed)
    y, certificate = find_second_order_point(entry.lift, cost, y0, SolverParams(seed=seed))
    assert certificate.stop_reason == StopReason.CONVERGED
    x = entry.lift.phi(y)
    cone = cone_at(entry.set_desc, x, SOLVER_FACE_POLICY)
    assert downstream_stationarity(entry.lift, cost, y, cone) >= -1e-6
    lipschitz = float(np.linalg.eigvalsh(cost.params["a"])[-1])
    _, oracle = projected_gradient_oracle(cost, entry.set_desc, np.full(10, 0.1), lipschitz)
    assert certificate.value == pytest.approx(oracle, abs=1e-6)


def test_projected_gradient_on_product_set():
    product_set = ProductSet((Simplex(3), Ball(2)))
    project = projection_for(product_set)
    assert project(np.array([2.0, 0.0, 0.0, 3.0, 4.0])) == pytest.approx([1.0, 0.0, 0.0, 0.6, 0.8])
    # separable cost: <c, p> on the simplex plus |q - (2, 0)|^2 / 2 on the disk
    c = np.array([3.0, 1.0, 2.0])
    cost = quadratic(np.diag([0.0, 0.0, 0.0, 1.0, 1.0]), b=np.concatenate([c, [-2.0, 0.0]]), c=2.0)
    x, value = projected_gradient_oracle(cost, product_set, product_set.sample(0), 1.0)
    assert x == pytest.approx([0.0, 1.0, 0.0, 1.0, 0.0], abs=1e-6)
    assert value == pytest.approx(1.0 + 0.5, abs=1e-6)
    assert product_set.is_feasible(x, 1e-8)


@pytest.mark.parametrize("entry_id", list(EntryId))
@pytest.mark.parametrize("seed", range(3))
def test_fd_validate_on_every_entry(entry_id, seed):
    entry = build(entry_id)
    cost = random_quadratic_quartic(entry.lift.ambient_dim, seed=seed)
    for regime in regimes(entry):
        report = fd_validate(entry.lift, cost, sample_point(entry, regime, seed), seed=seed)
        assert report.passed, (regime, report.grad_slope, report.hess_slope)
