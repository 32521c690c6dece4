from typing import Callable, Sequence

import numpy as np

from .constants import (
    ARMIJO_C,
    BACKTRACK_FACTOR,
    BB_MAX_STEP,
    BB_MIN_STEP,
    FD_GRAD_SLOPE,
    FD_HESS_SLOPE,
    FD_STEPS,
    HESS_FD_STEP,
    MAX_BACKTRACKS,
    PGD_MAX_ITERS,
    PGD_TOL,
    HessianSource,
    StopReason,
)
from .costs import Cost
from .schemas import FdReport, SolverCertificate, SolverParams
from ..common.exceptions import (
    InvalidInputException,
    NotConvergedException,
    RetractionFailureException,
)
from ..common.logger import get_logger
from ..cones.models import TangentCone
from ..cones.service import stationarity_gap
from ..cones.sets import Ball, Orthant, ProductSet, SetDesc, Simplex, StochasticMatrices
from ..lift.models import LQData, Lift
from ..lift.service import form_from_tensor, lq, polarization_tensor
from ..manifold.service import curve, pull_back, require_on_manifold
from ..numerics.service import as_generator, loglog_slope, project_simplex, sym_eig

logger = get_logger(__name__)

_ROUNDING = 10 * np.finfo(float).eps


def _flat(a) -> np.ndarray:
    return np.asarray(a, dtype=float).reshape(-1)


def _data(lift: Lift, y, data: LQData | None) -> LQData:
    return data if data is not None else lq(lift, y, run_guards=False)


def objective(lift: Lift, cost: Cost, y) -> float:
    """g(y) = f(phi(y))."""
    return cost(lift.phi(_flat(y)))


def grad_g(lift: Lift, y, cost: Cost, data: LQData | None = None) -> np.ndarray:
    """Riemannian gradient of g = f o phi in tangent coordinates: L^T grad f(phi(y))."""
    data = _data(lift, y, data)
    return data.L.T @ _flat(cost.gradient(data.x))


def hess_g(lift: Lift, y, cost: Cost, data: LQData | None = None,
           tensor: np.ndarray | None = None) -> np.ndarray:
    """Riemannian Hessian of g in tangent coordinates: L^T H L plus the Q-form of grad f."""
    data = _data(lift, y, data)
    if data.tangent_dim == 0:
        return np.zeros((0, 0))
    if tensor is None:
        tensor = polarization_tensor(lift, data.y, data)
    hl = np.column_stack([_flat(cost.hess_vec(data.x, data.L[:, j])) for j in range(data.tangent_dim)])
    hess = data.L.T @ hl + form_from_tensor(tensor, cost.gradient(data.x))
    return 0.5 * (hess + hess.T)


def _ambient_gradient(lift: Lift, cost: Cost, y: np.ndarray) -> np.ndarray:
    data = lq(lift, y, run_guards=False)
    return data.lift_coords(grad_g(lift, y, cost, data))


def hess_g_fd(lift: Lift, y, cost: Cost, data: LQData | None = None, h: float = HESS_FD_STEP) -> np.ndarray:
    """Central differences of the Riemannian gradient along curves, projected back onto T_yM."""
    data = _data(lift, y, data)
    columns = []
    for j in range(data.tangent_dim):
        b = data.basis[:, j]
        ahead = _ambient_gradient(lift, cost, curve(lift.manifold, data.y, b, None, h))
        behind = _ambient_gradient(lift, cost, curve(lift.manifold, data.y, -b, None, h))
        columns.append(data.basis.T @ (ahead - behind) / (2 * h))
    if not columns:
        return np.zeros((0, 0))
    hess = np.column_stack(columns)
    return 0.5 * (hess + hess.T)


def _hess_residuals(g0, coords, grad, hess, ts, values) -> list[float]:
    curvature = float(coords @ hess @ coords)
    return [abs(gt - g0 - t * float(grad @ coords) - 0.5 * t * t * curvature) for t, gt in zip(ts, values)]


def fd_validate(lift: Lift, cost: Cost, y, v=None, ts: Sequence[float] = FD_STEPS, seed=0) -> FdReport:
    """Taylor-residual slopes of g along a curve: first order checks grad_g, second order hess_g.

    The Hessian slope is that of the second-order residual divided by t^2.
    When the closed-form Hessian fails, the finite-difference Hessian is tried and reported instead.
    """
    data = lq(lift, y)
    if v is None:
        coords = as_generator(seed).standard_normal(data.tangent_dim)
        coords /= max(float(np.linalg.norm(coords)), 1e-300)
    else:
        coords = data.basis.T @ _flat(v)
    direction = data.lift_coords(coords)
    grad = grad_g(lift, data.y, cost, data)
    hess = hess_g(lift, data.y, cost, data)
    g0 = objective(lift, cost, data.y)
    values = [objective(lift, cost, curve(lift.manifold, data.y, direction, None, t)) for t in ts]
    first = [abs(gt - g0 - t * float(grad @ coords)) for t, gt in zip(ts, values)]
    second = _hess_residuals(g0, coords, grad, hess, ts, values)
    scale = max(1.0, abs(g0))
    grad_slope = loglog_slope(ts, first, scale)
    raw = loglog_slope(ts, second, scale)
    hess_slope = None if raw is None else raw - 2.0
    grad_ok = grad_slope is None or grad_slope >= FD_GRAD_SLOPE
    hess_ok = hess_slope is None or hess_slope >= FD_HESS_SLOPE
    source, fallback_slope = HessianSource.CLOSED_FORM, None
    if not hess_ok:
        logger.warning(f"Closed-form Hessian of {lift.name} failed validation (slope {hess_slope}), trying differences")
        fallback = hess_g_fd(lift, data.y, cost, data)
        raw = loglog_slope(ts, _hess_residuals(g0, coords, grad, fallback, ts, values), scale)
        fallback_slope = None if raw is None else raw - 2.0
        hess_ok = fallback_slope is None or fallback_slope >= FD_HESS_SLOPE
        source = HessianSource.FINITE_DIFFERENCE
    if not grad_ok:
        logger.warning(f"Gradient of {lift.name} failed validation (slope {grad_slope})")
    return FdReport(
        lift=lift.name,
        ts=list(ts),
        grad_residuals=first,
        hess_residuals=second,
        grad_slope=grad_slope,
        hess_slope=hess_slope,
        hessian_source=source,
        fallback_hess_slope=fallback_slope,
        passed=grad_ok and hess_ok,
    )


def _retract(lift: Lift, z: np.ndarray) -> np.ndarray | None:
    try:
        return pull_back(lift.manifold, z)
    except RetractionFailureException:
        return None


def _bb_step(prev_y, prev_grad, y, grad, grad_norm) -> float:
    if prev_y is None:
        return 1.0 / max(1.0, grad_norm)
    s, z = y - prev_y, grad - prev_grad
    sz = abs(float(s @ z))
    if sz == 0.0:
        return 1.0 / max(1.0, grad_norm)
    return float(np.clip((s @ s) / sz, BB_MIN_STEP, BB_MAX_STEP))


def _gradient_step(lift, cost, y, value, grad, grad_norm, step):
    slack = _ROUNDING * max(1.0, abs(value))
    for _ in range(MAX_BACKTRACKS):
        candidate = _retract(lift, y - step * grad)
        if candidate is not None:
            new_value = objective(lift, cost, candidate)
            if new_value <= value - ARMIJO_C * step * grad_norm ** 2 + slack:
                return candidate, new_value
        step *= BACKTRACK_FACTOR
    return None


def _curvature_step(lift, cost, y, value, direction, curvature):
    """Armijo along the curve through +-direction; the better sign wins."""
    best = None
    for sign in (1.0, -1.0):
        t = 1.0
        for _ in range(MAX_BACKTRACKS):
            try:
                candidate = curve(lift.manifold, y, sign * direction, None, t)
            except RetractionFailureException:
                candidate = None
            if candidate is not None:
                new_value = objective(lift, cost, candidate)
                if new_value <= value + 0.5 * ARMIJO_C * t * t * curvature:
                    if best is None or new_value < best[1]:
                        best = (candidate, new_value)
                    break
            t *= BACKTRACK_FACTOR
    return best


def _perturb(lift, cost, data: LQData, radius: float, rng):
    coords = rng.standard_normal(data.tangent_dim)
    coords *= radius / max(float(np.linalg.norm(coords)), 1e-300)
    candidate = _retract(lift, data.y + data.lift_coords(coords))
    if candidate is None:
        return None
    return candidate, objective(lift, cost, candidate)


def find_second_order_point(lift: Lift, cost: Cost, y0, params: SolverParams | None = None):
    """Approximate 2-critical point of g = f o phi from y0.

    Gradient steps use a Barzilai-Borwein trial step with Armijo backtracking. Once the gradient is
    below grad_tol the Hessian is checked; a negative eigenvalue triggers a curvature step along its
    eigenvector and, failing that, a random perturbation. Returns (y, SolverCertificate).
    """
    params = params or SolverParams()
    rng = as_generator(params.seed)
    y = require_on_manifold(lift.manifold, y0)
    value = objective(lift, cost, y)
    prev_y = prev_grad = None
    grad_trace: list[float] = []
    eig_trace: list[float | None] = []
    curvature_steps = perturbations = 0

    def certificate(iterations, grad_norm, min_eig, reason):
        return SolverCertificate(
            value=value,
            grad_norm=grad_norm,
            hess_min_eig=min_eig,
            iterations=iterations,
            negative_curvature_steps=curvature_steps,
            perturbations=perturbations,
            stop_reason=reason,
            grad_trace=grad_trace,
            min_eig_trace=eig_trace,
        )

    grad_norm, min_eig = np.inf, None
    for iteration in range(params.max_iters):
        data = lq(lift, y, run_guards=False)
        coords = grad_g(lift, y, cost, data)
        grad_norm = float(np.linalg.norm(coords))
        grad_trace.append(grad_norm)
        if grad_norm <= params.grad_tol:
            eigvals, eigvecs = sym_eig(hess_g(lift, y, cost, data))
            min_eig = float(eigvals[0]) if eigvals.size else 0.0
            eig_trace.append(min_eig)
            if min_eig >= -params.hess_tol:
                logger.info(f"{lift.name}: 2-critical point after {iteration} iterations, g = {value:.12g}")
                return y, certificate(iteration, grad_norm, min_eig, StopReason.CONVERGED)
            moved = _curvature_step(lift, cost, y, value, data.lift_coords(eigvecs[:, 0]), min_eig)
            if moved is not None:
                curvature_steps += 1
            else:
                logger.debug(f"Curvature step failed at lambda_min = {min_eig:.3e}, perturbing")
                moved = _perturb(lift, cost, data, params.perturbation, rng)
                perturbations += 1
            if moved is not None:
                y, value = moved
            prev_y = None
            continue
        eig_trace.append(None)
        grad = data.lift_coords(coords)
        step = _bb_step(prev_y, prev_grad, y, grad, grad_norm)
        moved = _gradient_step(lift, cost, y, value, grad, grad_norm, step)
        if moved is None:
            logger.debug(f"Line search failed at |grad| = {grad_norm:.3e}, perturbing")
            moved = _perturb(lift, cost, data, params.perturbation, rng)
            perturbations += 1
            prev_y = None
            if moved is None:
                continue
        else:
            prev_y, prev_grad = y, grad
        y, value = moved
    cert = certificate(params.max_iters, grad_norm, min_eig, StopReason.MAX_ITERS)
    logger.warning(f"{lift.name}: no 2-critical point within {params.max_iters} iterations (|grad| = {grad_norm:.3e})")
    raise NotConvergedException(
        f"Solver stopped after {params.max_iters} iterations with |grad| = {grad_norm:.3e}",
        best_point=y,
        certificate=cert,
    )


def downstream_stationarity(lift: Lift, cost: Cost, y, cone: TangentCone) -> float:
    """Stationarity gap of grad f at phi(y) against the tangent cone there."""
    x = _flat(lift.phi(_flat(y)))
    return stationarity_gap(cone, cost.gradient(x))


def projection_for(set_desc: SetDesc) -> Callable[[np.ndarray], np.ndarray]:
    """Euclidean projection onto the convex sets the downstairs oracle supports."""
    if isinstance(set_desc, Simplex):
        return project_simplex
    if isinstance(set_desc, StochasticMatrices):
        n = set_desc.n
        return lambda z: np.concatenate([project_simplex(col) for col in z.reshape(-1, n)])
    if isinstance(set_desc, Orthant):
        return lambda z: np.maximum(z, 0.0)
    if isinstance(set_desc, Ball):
        return lambda z: z / max(1.0, float(np.linalg.norm(z)))
    if isinstance(set_desc, ProductSet):
        parts = [projection_for(part) for part in set_desc.parts]
        return lambda z: np.concatenate([p(q) for p, q in zip(parts, set_desc.split(_flat(z)))])
    logger.warning(f"No projection available for {set_desc.kind.value}")
    raise InvalidInputException(f"Projected gradient is not available on {set_desc.kind.value} sets")


def projected_gradient_oracle(cost: Cost, set_desc: SetDesc, x0, lipschitz: float,
                              max_iters: int = PGD_MAX_ITERS, tol: float = PGD_TOL) -> tuple[np.ndarray, float]:
    """Accelerated projected gradient for a convex cost with lipschitz-continuous gradient."""
    if lipschitz <= 0:
        raise InvalidInputException(f"Lipschitz constant must be positive, got {lipschitz}")
    project = projection_for(set_desc)
    x = project(_flat(x0))
    z, momentum = x.copy(), 1.0
    for iteration in range(max_iters):
        x_next = project(z - cost.gradient(z) / lipschitz)
        momentum_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum ** 2))
        z = x_next + ((momentum - 1.0) / momentum_next) * (x_next - x)
        moved = float(np.linalg.norm(x_next - x))
        x, momentum = x_next, momentum_next
        if moved <= tol * max(1.0, float(np.linalg.norm(x))):
            logger.debug(f"Projected gradient converged after {iteration + 1} iterations")
            break
    return x, cost(x)
