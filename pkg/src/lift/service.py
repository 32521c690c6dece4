from typing import Sequence

import numpy as np

from .constants import (
    COEXACT_TOL,
    TAYLOR_FIRST_ORDER_SLOPE,
    TAYLOR_SECOND_ORDER_SLOPE,
    TAYLOR_STEPS,
)
from .models import LQData, Lift
from .schemas import TaylorReport
from ..common.exceptions import NotCoexactException
from ..common.logger import get_logger
from ..manifold.models import ChartDomain
from ..manifold.service import (
    check_constant_rank,
    curve,
    require_on_manifold,
    tangent_basis,
)
from ..numerics.schemas import TolerancePolicy
from ..numerics.service import kernel_basis, loglog_slope, pinv, range_basis

logger = get_logger(__name__)


def _flat(a) -> np.ndarray:
    return np.asarray(a, dtype=float).reshape(-1)


def check_guards(lift: Lift, y, policy: TolerancePolicy | None = None) -> np.ndarray:
    """Validate y on the lift's manifold, its constant-rank neighbourhood and the lift's own guards."""
    y = require_on_manifold(lift.manifold, y)
    check_constant_rank(lift.manifold, y, policy=policy)
    for guard in lift.guards:
        guard(y)
    return y


def value(lift: Lift, y) -> np.ndarray:
    y = require_on_manifold(lift.manifold, y)
    return _flat(lift.phi(y))


def jacobian(lift: Lift, y) -> np.ndarray:
    """Ambient Jacobian of the extension of phi at y, one column per coordinate of M's ambient space."""
    y = _flat(y)
    eye = np.eye(y.size)
    cols = [_flat(lift.dphi(y, eye[:, j])) for j in range(y.size)]
    return np.column_stack(cols) if cols else np.zeros((lift.ambient_dim, 0))


def lq(lift: Lift, y, policy: TolerancePolicy | None = None, run_guards: bool = True) -> LQData:
    """L_y in an orthonormal tangent basis, with bases of its image and kernel."""
    if run_guards:
        y = check_guards(lift, y, policy)
    else:
        y = _flat(y)
    basis = tangent_basis(lift.manifold, y, policy)
    if basis.shape[1]:
        L = np.column_stack([_flat(lift.dphi(y, basis[:, j])) for j in range(basis.shape[1])])
    else:
        L = np.zeros((lift.ambient_dim, 0))
    return LQData(
        y=y,
        x=_flat(lift.phi(y)),
        basis=basis,
        L=L,
        im_l_basis=range_basis(L, policy),
        ker_l_basis=kernel_basis(L, policy),
    )


def _correction_operator(lift: Lift, y: np.ndarray, policy: TolerancePolicy | None) -> np.ndarray | None:
    if isinstance(lift.manifold, ChartDomain) or lift.manifold.codim == 0:
        return None
    return pinv(lift.manifold.constraint_jacobian(y), policy)


def _qmap(lift: Lift, y: np.ndarray, v: np.ndarray, correction: np.ndarray | None) -> np.ndarray:
    q = _flat(lift.d2phi(y, v))
    if correction is None:
        return q
    u = -correction @ lift.manifold.constraint_curvature(y, v)
    return q + _flat(lift.dphi(y, u))


def qmap(lift: Lift, y, v, policy: TolerancePolicy | None = None) -> np.ndarray:
    """Q_y(v) = D^2 phi[v, v] + D phi[u_v] with the minimum-norm second-order correction u_v."""
    y = _flat(y)
    return _qmap(lift, y, _flat(v), _correction_operator(lift, y, policy))


def polarization_tensor(lift: Lift, y, data: LQData | None = None,
                        policy: TolerancePolicy | None = None) -> np.ndarray:
    """T[i, j] = Q(b_i, b_j), the symmetric bilinear form of Q on the tangent basis.

    Shape (d, d, E). The pseudo-inverse of Dh is formed once.
    """
    y = _flat(y)
    basis = data.basis if data is not None else tangent_basis(lift.manifold, y, policy)
    d = basis.shape[1]
    correction = _correction_operator(lift, y, policy)
    diag = [_qmap(lift, y, basis[:, i], correction) for i in range(d)]
    tensor = np.zeros((d, d, lift.ambient_dim))
    for i in range(d):
        tensor[i, i] = diag[i]
        for j in range(i + 1, d):
            both = _qmap(lift, y, basis[:, i] + basis[:, j], correction)
            tensor[i, j] = tensor[j, i] = 0.5 * (both - diag[i] - diag[j])
    return tensor


def form_from_tensor(tensor: np.ndarray, w) -> np.ndarray:
    """The matrix of v -> <w, Q(v)> from a polarization tensor."""
    if tensor.shape[0] == 0:
        return np.zeros((0, 0))
    form = np.tensordot(tensor, _flat(w), axes=([2], [0]))
    return 0.5 * (form + form.T)


def coexact_part(data: LQData, w) -> np.ndarray:
    """Project w onto (im L)^perp, raising when the discarded component is not negligible."""
    w = _flat(w)
    along = data.im_l_basis @ (data.im_l_basis.T @ w)
    if np.linalg.norm(along) > COEXACT_TOL * max(1.0, float(np.linalg.norm(w))):
        logger.warning(f"w has component {np.linalg.norm(along):.3e} along im L")
        raise NotCoexactException(
            f"w is not orthogonal to im L (component {np.linalg.norm(along):.3e})"
        )
    return w - along


def qform_matrix(lift: Lift, y, w, data: LQData | None = None, tensor: np.ndarray | None = None,
                 policy: TolerancePolicy | None = None) -> np.ndarray:
    """Matrix of the quadratic form v -> <w, Q_y(v)> on T_yM for w orthogonal to im L_y."""
    if data is None:
        data = lq(lift, y, policy)
    w = coexact_part(data, w)
    if tensor is None:
        tensor = polarization_tensor(lift, data.y, data, policy)
    return form_from_tensor(tensor, w)


def taylor_residuals(lift: Lift, y, v=None, ts: Sequence[float] = TAYLOR_STEPS,
                     seed=0, policy: TolerancePolicy | None = None) -> TaylorReport:
    """First- and second-order Taylor residuals of phi along the canonical curve through y."""
    data = lq(lift, y, policy)
    if v is None:
        rng = np.random.default_rng(seed)
        coords = rng.standard_normal(data.tangent_dim)
        v = data.lift_coords(coords / max(np.linalg.norm(coords), 1e-300))
    v = _flat(v)
    lv = _flat(lift.dphi(data.y, v))
    qv = qmap(lift, data.y, v, policy)
    first, second = [], []
    for t in ts:
        moved = _flat(lift.phi(curve(lift.manifold, data.y, v, None, t, policy)))
        r1 = moved - data.x - t * lv
        first.append(float(np.linalg.norm(r1)))
        second.append(float(np.linalg.norm(r1 - 0.5 * t * t * qv)))
    scale = max(1.0, float(np.linalg.norm(data.x)))
    s1 = loglog_slope(ts, first, scale)
    s2 = loglog_slope(ts, second, scale)
    passed = (s1 is None or s1 >= TAYLOR_FIRST_ORDER_SLOPE) and (s2 is None or s2 >= TAYLOR_SECOND_ORDER_SLOPE)
    if not passed:
        logger.warning(f"Taylor check failed for {lift.name}: slopes {s1}, {s2}")
    return TaylorReport(
        lift=lift.name,
        ts=list(ts),
        first_order=first,
        second_order=second,
        first_slope=s1,
        second_slope=s2,
        passed=passed,
    )
