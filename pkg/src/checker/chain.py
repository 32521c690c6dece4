"""Links of the 2=>1 implication chain: A-sufficient, B-dual-sufficient, W-condition, necessary condition.

Forms are handled in a tangent basis ordered [ker L | (ker L)^perp]; coexact vectors w are written
in an orthonormal basis N of (im L)^perp, so that w = N c.
"""
import numpy as np

from .constants import (
    A_SET_ITERS,
    A_SET_RESIDUAL_TOL,
    A_SET_RESTARTS,
    B_RATE_BOUNDS,
    B_RATE_INDICES,
    B_TARGET_TOL,
    DECOMPOSITION_CHECK_TOL,
    RANGE_INCLUSION_TOL,
    ChainLink,
    Verdict,
)
from .schemas import PropertyVerdict
from ..common.logger import get_logger
from ..config import settings
from ..cones.models import TangentCone
from ..cones.service import sample_directions, stationarity_gap
from ..lift.models import LQData, Lift
from ..lift.service import coexact_part, form_from_tensor, lq, polarization_tensor, qmap
from ..numerics.schemas import TolerancePolicy
from ..numerics.service import (
    DEFAULT_POLICY,
    as_generator,
    kernel_basis,
    min_eigenvalue,
    min_norm_solve,
    orthogonal_complement,
    pinv,
    range_basis,
)

logger = get_logger(__name__)

CHAIN_ORDER = (
    ChainLink.A_SUFFICIENT,
    ChainLink.B_DUAL_SUFFICIENT,
    ChainLink.W_CONDITION,
    ChainLink.NECESSARY,
)


def _flat(a) -> np.ndarray:
    return np.asarray(a, dtype=float).reshape(-1)


def prepare(lift: Lift, y, data: LQData | None, tensor: np.ndarray | None,
            policy: TolerancePolicy | None = None) -> tuple[LQData, np.ndarray]:
    if data is None:
        data = lq(lift, y, policy)
    if tensor is None:
        tensor = polarization_tensor(lift, data.y, data, policy)
    return data, tensor


def form_blocks(form: np.ndarray, data: LQData) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Phi_1, Phi_2, Phi_3): the ker-ker, ker-complement and complement-complement blocks."""
    k, c = data.ker_l_basis, data.ker_complement
    return k.T @ form @ k, k.T @ form @ c, c.T @ form @ c


def w_test(form: np.ndarray, data: LQData, policy: TolerancePolicy | None = None) -> tuple[bool, float, float]:
    """(member, lambda_min(Phi_1), |(I - Phi_1 Phi_1^+) Phi_2|) for the W-set membership test."""
    policy = policy or DEFAULT_POLICY
    if data.ker_l_basis.shape[1] == 0:
        return True, 0.0, 0.0
    phi1, phi2, _ = form_blocks(form, data)
    scale = max(1.0, float(np.linalg.norm(form)))
    min_eig = min_eigenvalue(phi1)
    residual = phi2 - phi1 @ (pinv(phi1, policy) @ phi2)
    range_residual = float(np.linalg.norm(residual, 2)) if residual.size else 0.0
    member = min_eig >= -policy.psd_tol * scale and range_residual <= RANGE_INCLUSION_TOL * scale
    return member, min_eig, range_residual


def _psd_test(form: np.ndarray, policy: TolerancePolicy | None) -> bool:
    policy = policy or DEFAULT_POLICY
    return min_eigenvalue(form) >= -policy.psd_tol * max(1.0, float(np.linalg.norm(form)))


def w_set_member(lift: Lift, y, w, data: LQData | None = None, tensor: np.ndarray | None = None,
                 policy: TolerancePolicy | None = None) -> bool:
    """Whether w lies in W_y: Phi_1 is PSD and im Phi_2 is contained in im Phi_1."""
    data, tensor = prepare(lift, y, data, tensor, policy)
    w = coexact_part(data, w)
    member, _, _ = w_test(form_from_tensor(tensor, w), data, policy)
    return member


def _normal_tensor(data: LQData, tensor: np.ndarray) -> np.ndarray:
    return np.tensordot(tensor, data.normal_basis, axes=([2], [0]))


def _vectorized_blocks(data: LQData, tn: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Columns vec(Phi_1(e_a)), vec(Phi_2(e_a)) and vec(Phi(e_a)) for each normal direction e_a."""
    p = tn.shape[2]
    k, c = data.ker_l_basis, data.ker_complement
    phi1 = np.zeros((k.shape[1] ** 2, p))
    phi2 = np.zeros((k.shape[1] * c.shape[1], p))
    full = np.zeros((tn.shape[0] ** 2, p))
    for a in range(p):
        form = 0.5 * (tn[:, :, a] + tn[:, :, a].T)
        phi1[:, a] = (k.T @ form @ k).reshape(-1)
        phi2[:, a] = (k.T @ form @ c).reshape(-1)
        full[:, a] = form.reshape(-1)
    return phi1, phi2, full


def _signed(basis: np.ndarray) -> list[np.ndarray]:
    return [sign * basis[:, j] for j in range(basis.shape[1]) for sign in (1.0, -1.0)]


def _candidates(data: LQData, tn: np.ndarray, rng, samples: int, full_kernel: bool) -> list[np.ndarray]:
    """Unit coefficient vectors c: the signed basis, the kernels of the block maps, random draws."""
    p = tn.shape[2]
    phi1, phi2, full = _vectorized_blocks(data, tn)
    pools = [np.eye(p)]
    if full_kernel:
        pools.append(kernel_basis(full))
    else:
        pools.append(kernel_basis(np.vstack([phi1, phi2])))
        pools.append(kernel_basis(phi2))
    candidates = [c for pool in pools for c in _signed(pool)]
    for _ in range(samples):
        c = rng.standard_normal(p)
        candidates.append(c / np.linalg.norm(c))
    return candidates


def _scan(data: LQData, tn: np.ndarray, cone: TangentCone, candidates, is_member) -> dict:
    members, min_gap, worst = 0, 0.0, None
    for c in candidates:
        form = np.tensordot(tn, c, axes=([2], [0]))
        if not is_member(0.5 * (form + form.T)):
            continue
        members += 1
        w = data.normal_basis @ c
        gap = stationarity_gap(cone, w)
        if gap < min_gap:
            min_gap, worst = gap, w
    return {"candidates": len(candidates), "members": members, "min_gap": min_gap, "worst": worst}


def _sampled_verdict(scan: dict, link: ChainLink) -> PropertyVerdict:
    evidence = {k: scan[k] for k in ("candidates", "members", "min_gap")}
    if scan["min_gap"] >= -settings.STATIONARITY_TOL:
        verdict = Verdict.HOLDS
    elif scan["min_gap"] <= -settings.WITNESS_GAP_TOL:
        verdict = Verdict.FAILS
        evidence["witness_w"] = scan["worst"].tolist()
    else:
        verdict = Verdict.INCONCLUSIVE
    logger.debug(f"{link.value}: {verdict.value} over {scan['members']} members")
    return PropertyVerdict(verdict=verdict, evidence=evidence)


def necessary_condition(data: LQData, tensor: np.ndarray, cone: TangentCone, seed=0,
                        policy: TolerancePolicy | None = None,
                        samples: int | None = None) -> PropertyVerdict:
    """Every w orthogonal to im L with Phi(w) PSD must be in the dual of the tangent cone."""
    if data.normal_basis.shape[1] == 0:
        return PropertyVerdict(verdict=Verdict.HOLDS, evidence={"candidates": 0, "members": 0, "min_gap": 0.0})
    tn = _normal_tensor(data, tensor)
    rng = as_generator(seed)
    samples = settings.W_SET_SAMPLES if samples is None else samples
    scan = _scan(data, tn, cone, _candidates(data, tn, rng, samples, True), lambda f: _psd_test(f, policy))
    return _sampled_verdict(scan, ChainLink.NECESSARY)


def w_condition(data: LQData, tensor: np.ndarray, cone: TangentCone, seed=0,
                policy: TolerancePolicy | None = None, necessary: PropertyVerdict | None = None,
                samples: int | None = None) -> PropertyVerdict:
    """W_y contained in the dual of the tangent cone, tested over sampled members of W_y.

    A failed necessary condition fails this link with the same w, since PSD forms pass the W test.
    """
    if necessary is not None and necessary.verdict == Verdict.FAILS:
        return PropertyVerdict(
            verdict=Verdict.FAILS,
            evidence={"witness_w": necessary.evidence["witness_w"], "min_gap": necessary.evidence["min_gap"],
                      "from_necessary": True},
        )
    if data.normal_basis.shape[1] == 0:
        return PropertyVerdict(verdict=Verdict.HOLDS, evidence={"candidates": 0, "members": 0, "min_gap": 0.0})
    tn = _normal_tensor(data, tensor)
    rng = as_generator(seed)
    samples = settings.W_SET_SAMPLES if samples is None else samples
    scan = _scan(data, tn, cone, _candidates(data, tn, rng, samples, False),
                 lambda f: w_test(f, data, policy)[0])
    return _sampled_verdict(scan, ChainLink.W_CONDITION)


def _verified_decomposition(lift: Lift, data: LQData, d: np.ndarray, v: np.ndarray) -> bool:
    v = _flat(v)
    coords = data.basis.T @ v
    scale = max(1.0, float(np.linalg.norm(d)), float(v @ v))
    if np.linalg.norm(v - data.lift_coords(coords)) > DECOMPOSITION_CHECK_TOL * scale:
        return False
    if np.linalg.norm(data.L @ coords) > DECOMPOSITION_CHECK_TOL * scale:
        return False
    residual = data.normal_basis.T @ (d - qmap(lift, data.y, v))
    return float(np.linalg.norm(residual)) <= DECOMPOSITION_CHECK_TOL * scale


def _gauss_newton_decompose(nk: np.ndarray, target: np.ndarray, rng) -> bool:
    """Solve q(a) = target for q(a)_p = sum_ij nk[i, j, p] a_i a_j by restarted Gauss-Newton."""
    k = nk.shape[0]
    tol = A_SET_RESIDUAL_TOL * max(1.0, float(np.linalg.norm(target)))
    radius = np.sqrt(max(float(np.linalg.norm(target)), 1e-12) / k)
    for _ in range(A_SET_RESTARTS):
        a = radius * rng.standard_normal(k)
        for _ in range(A_SET_ITERS):
            residual = np.einsum("ijp,i,j->p", nk, a, a) - target
            if np.linalg.norm(residual) <= tol:
                return True
            jac = 2.0 * np.einsum("ijp,j->pi", nk, a)
            a = a - min_norm_solve(jac, residual)
            if not np.all(np.isfinite(a)):
                break
        residual = np.einsum("ijp,i,j->p", nk, a, a) - target
        if np.all(np.isfinite(residual)) and np.linalg.norm(residual) <= tol:
            return True
    return False


def a_set_contains(lift: Lift, y, d, data: LQData | None = None, tensor: np.ndarray | None = None, seed=0,
                   policy: TolerancePolicy | None = None) -> bool | None:
    """Whether d = Q(v) + L u for some v in ker L; None when neither a decomposition nor a refutation is found."""
    policy = policy or DEFAULT_POLICY
    data, tensor = prepare(lift, y, data, tensor, policy)
    d = _flat(d)
    normal = data.normal_basis
    target = normal.T @ d
    if np.linalg.norm(target) <= A_SET_RESIDUAL_TOL * max(1.0, float(np.linalg.norm(d))):
        return True
    k = data.ker_l_basis
    if k.shape[1] == 0:
        return False
    nk = np.tensordot(np.einsum("ia,jb,ije->abe", k, k, tensor), normal, axes=([2], [0]))
    if np.max(np.abs(nk)) <= policy.zero_tol * max(1.0, float(np.max(np.abs(tensor)))):
        return False
    if lift.a_set_decomposer is not None:
        found = lift.a_set_decomposer(data.y, d)
        if found.contains is False:
            return False
        if found.contains and _verified_decomposition(lift, data, d, found.v):
            return True
        if found.contains:
            logger.debug(f"Closed-form decomposition for {lift.name} failed verification, using Gauss-Newton")
    if _gauss_newton_decompose(nk, target, as_generator(seed)):
        return True
    return None


def a_sufficient(lift: Lift, data: LQData, tensor: np.ndarray, cone: TangentCone, seed=0,
                 policy: TolerancePolicy | None = None, directions: int | None = None) -> PropertyVerdict:
    """Every sampled tangent-cone direction lies in A_y = Q(ker L) + im L."""
    count = settings.A_SET_DIRECTIONS if directions is None else directions
    sampled = sample_directions(cone, count, seed)
    rng = as_generator(seed)
    for checked, d in enumerate(sampled):
        result = a_set_contains(lift, data.y, d, data, tensor, rng, policy)
        if result is True:
            continue
        verdict = Verdict.FAILS if result is False else Verdict.INCONCLUSIVE
        return PropertyVerdict(
            verdict=verdict,
            evidence={"directions": len(sampled), "checked": checked + 1, "direction": d.tolist()},
        )
    return PropertyVerdict(verdict=Verdict.HOLDS, evidence={"directions": len(sampled), "checked": len(sampled)})


def _rate_ok(norms: list[float]) -> bool:
    low, high = B_RATE_BOUNDS
    for before, after in zip(norms, norms[1:]):
        if after <= 1e-14:
            continue
        if before <= 1e-14 or not low <= after / before <= high:
            return False
    return True


def b_dual_sufficient(lift: Lift, data: LQData, cone: TangentCone) -> PropertyVerdict:
    """Certify B_y^* in the dual cone from a degenerate family spanning Q-limits."""
    family = lift.degenerate_family(data.y) if lift.degenerate_family is not None else []
    if not family:
        return PropertyVerdict(verdict=Verdict.INCONCLUSIVE, evidence={"directions": 0})
    rate_ok = target_ok = True
    for item in family:
        vs = [_flat(item.direction(i)) for i in B_RATE_INDICES]
        norms = [float(np.linalg.norm(_flat(lift.dphi(data.y, v)))) for v in vs]
        rate_ok = rate_ok and _rate_ok(norms)
        tol = B_TARGET_TOL * max(1.0, float(np.linalg.norm(item.target)))
        target_ok = target_ok and all(
            np.linalg.norm(qmap(lift, data.y, v) - item.target) <= tol for v in vs
        )
    targets = np.column_stack([_flat(item.target) for item in family])
    dual = orthogonal_complement(range_basis(np.hstack([targets, data.im_l_basis])), data.x.size)
    gaps = [stationarity_gap(cone, w) for w in _signed(dual)]
    min_gap = min(gaps, default=0.0)
    evidence = {
        "directions": len(family),
        "rate_ok": rate_ok,
        "target_ok": target_ok,
        "dual_dim": dual.shape[1],
        "min_gap": min_gap,
    }
    if rate_ok and target_ok and min_gap >= -settings.STATIONARITY_TOL:
        return PropertyVerdict(verdict=Verdict.HOLDS, evidence=evidence)
    return PropertyVerdict(verdict=Verdict.INCONCLUSIVE, evidence=evidence)


def _implied(verdict: Verdict, source: ChainLink | str) -> PropertyVerdict:
    return PropertyVerdict(verdict=verdict, evidence={"implied_by": str(getattr(source, "value", source))}, inferred=True)


def infer_chain(links: dict[ChainLink, PropertyVerdict],
                one_to_one: Verdict | None = None) -> dict[ChainLink, PropertyVerdict]:
    """Propagate proven implications: Holds forward along A => B => W => N, Fails backward.

    1=>1 Holds implies W Holds. Holds is never propagated backward, so B is not inferred from W.
    """
    links = dict(links)
    for i in range(len(CHAIN_ORDER) - 1, 0, -1):
        if links[CHAIN_ORDER[i]].verdict != Verdict.FAILS:
            continue
        for earlier in CHAIN_ORDER[:i]:
            sampled = links[earlier]
            if sampled.verdict == Verdict.FAILS:
                continue
            links[earlier] = _implied(Verdict.FAILS, CHAIN_ORDER[i])
            if sampled.verdict == Verdict.HOLDS:
                logger.warning(f"{earlier.value} sampled as holding but {CHAIN_ORDER[i].value} fails; overriding")
                links[earlier].evidence.update(contradicted_sample=True, sampled_verdict=sampled.verdict.value,
                                               sampled_evidence=sampled.evidence)
    if one_to_one == Verdict.HOLDS and links[ChainLink.W_CONDITION].verdict == Verdict.INCONCLUSIVE:
        links[ChainLink.W_CONDITION] = _implied(Verdict.HOLDS, "1=>1")
    for i, link in enumerate(CHAIN_ORDER[:-1]):
        if links[link].verdict != Verdict.HOLDS:
            continue
        later = CHAIN_ORDER[i + 1]
        if links[later].verdict == Verdict.INCONCLUSIVE:
            links[later] = _implied(Verdict.HOLDS, link)
    return links
