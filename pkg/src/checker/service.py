import hashlib

import numpy as np

from . import chain
from .constants import (
    SLP_INDICES,
    SLP_MARGIN,
    SUBSPACE_MATCH_TOL,
    WITNESS_GRAD_TOL,
    WITNESS_HESS_TOL,
    ChainLink,
    Property,
    Verdict,
    WitnessKind,
)
from .schemas import PropertyReport, PropertyVerdict, WitnessCost, WitnessVerification
from ..catalog.models import CatalogEntry
from ..catalog.service import expected_verdicts, fiber_distance, pathological_sequence
from ..common.exceptions import (
    InvalidWitnessException,
    LiftException,
    NoPathologyException,
    NotCoexactException,
    WitnessSearchFailedException,
)
from ..common.logger import get_logger
from ..config import settings
from ..cones.models import TangentCone
from ..cones.service import cone_at, is_linear, sample_directions, stationarity_gap
from ..cones.sets import SetDesc
from ..lift.models import LQData, Lift
from ..lift.service import coexact_part, form_from_tensor, lq, polarization_tensor
from ..numerics.schemas import TolerancePolicy
from ..numerics.service import (
    DEFAULT_POLICY,
    min_eigenvalue,
    pinv,
    range_basis,
    subspace_distance,
    sym_eig,
)
from ..optimize.costs import quadratic_shift
from ..optimize.service import downstream_stationarity, grad_g, hess_g

logger = get_logger(__name__)

DIGEST_DIGITS = 12


def point_digest(y) -> str:
    """sha256 of the coordinates rounded to 12 significant digits."""
    coords = np.asarray(y, dtype=float).reshape(-1)
    text = ",".join(f"{value:.{DIGEST_DIGITS - 1}e}" for value in coords + 0.0)
    return hashlib.sha256(text.encode()).hexdigest()


def _worst_direction(cone: TangentCone, w: np.ndarray, seed=0) -> list[float]:
    sampled = sample_directions(cone, settings.WITNESS_CANDIDATES, seed)
    if not sampled:
        return []
    return min(sampled, key=lambda d: float(w @ d)).tolist()


def witness_linear_cost(lift: Lift, y, cone: TangentCone, data: LQData | None = None, seed=0) -> WitnessCost:
    """f(x) = <w, x> with w orthogonal to im L and outside the dual cone: y is 1-critical, x is not stationary."""
    data = data if data is not None else lq(lift, y)
    normal = data.normal_basis
    if normal.shape[1] == 0:
        logger.warning(f"im L is the whole space for {lift.name}; no linear witness")
        raise WitnessSearchFailedException("im L is the whole ambient space; no linear witness exists")
    candidates = [sign * normal[:, j] for j in range(normal.shape[1]) for sign in (1.0, -1.0)]
    for d in sample_directions(cone, settings.WITNESS_CANDIDATES, seed):
        projected = -(normal @ (normal.T @ d))
        size = float(np.linalg.norm(projected))
        if size > DEFAULT_POLICY.zero_tol:
            candidates.append(projected / size)
    gaps = [stationarity_gap(cone, w) for w in candidates]
    best = int(np.argmin(gaps))
    if gaps[best] > -settings.WITNESS_GAP_TOL:
        logger.warning(f"No linear witness for {lift.name}: best gap {gaps[best]:.3e}")
        raise WitnessSearchFailedException(f"Best linear candidate has gap {gaps[best]:.3e}")
    w = candidates[best]
    grad_norm = float(np.linalg.norm(data.L.T @ w))
    verification = WitnessVerification(
        grad_norm=grad_norm,
        downstream_gap=gaps[best],
        witness_direction=_worst_direction(cone, w, seed),
        passed=grad_norm <= WITNESS_GRAD_TOL and gaps[best] <= -settings.WITNESS_GAP_TOL,
    )
    return WitnessCost(kind=WitnessKind.LINEAR, w=w.tolist(), verification=verification)


def check_one_implies_one(lift: Lift, y, cone: TangentCone, data: LQData | None = None,
                          seed=0, with_witness: bool = True) -> PropertyVerdict:
    """1=>1 holds at y exactly when im L equals the tangent cone."""
    data = data if data is not None else lq(lift, y)
    if is_linear(cone):
        distance = subspace_distance(data.im_l_basis, range_basis(cone.basis))
        evidence = {"projector_distance": distance, "rank_l": data.rank, "cone_dim": int(cone.basis.shape[1])}
        verdict = Verdict.HOLDS if distance <= SUBSPACE_MATCH_TOL else Verdict.FAILS
    else:
        sampled = sample_directions(cone, settings.WITNESS_CANDIDATES, seed)
        normal = data.normal_basis
        outside = max((float(np.linalg.norm(normal.T @ d)) for d in sampled), default=0.0)
        evidence = {"cone_kind": cone.kind.value, "sampled_directions": len(sampled), "outside_im_l": outside}
        verdict = Verdict.FAILS
    if verdict == Verdict.HOLDS or not with_witness:
        return PropertyVerdict(verdict=verdict, evidence=evidence)
    try:
        witness = witness_linear_cost(lift, data.y, cone, data, seed)
    except WitnessSearchFailedException as exc:
        evidence["witness_error"] = exc.detail
        return PropertyVerdict(verdict=Verdict.INCONCLUSIVE, evidence=evidence)
    return PropertyVerdict(verdict=verdict, evidence=evidence, witness=witness)


def quadratic_weight(form: np.ndarray, data: LQData) -> float:
    """alpha making L^T(alpha I)L + Phi PSD, given the W-set conditions on Phi."""
    complement = data.ker_complement
    if complement.shape[1] == 0:
        return 1.0
    phi1, phi2, phi3 = chain.form_blocks(form, data)
    psi = complement.T @ data.L.T @ data.L @ complement
    schur = phi2.T @ pinv(phi1) @ phi2 - phi3 if phi1.size else -phi3
    top = float(sym_eig(schur)[0][-1])
    return max(0.0, top / min_eigenvalue(psi)) + 1.0


def witness_quadratic_cost(lift: Lift, y, w, cone: TangentCone, data: LQData | None = None,
                           tensor: np.ndarray | None = None, policy: TolerancePolicy | None = None,
                           seed=0) -> WitnessCost:
    """f(x') = <w, x'> + alpha/2 |x' - x|^2 making y 2-critical while x is not stationary."""
    data, tensor = chain.prepare(lift, y, data, tensor, policy)
    try:
        w = coexact_part(data, w)
    except NotCoexactException as exc:
        raise InvalidWitnessException(exc.detail)
    form = form_from_tensor(tensor, w)
    member, _, _ = chain.w_test(form, data, policy)
    gap = stationarity_gap(cone, w)
    if not member or gap > -settings.WITNESS_GAP_TOL:
        logger.warning(f"w is not a W-set member outside the dual cone (member={member}, gap={gap:.3e})")
        raise InvalidWitnessException(f"w must lie in W_y outside the dual cone (member={member}, gap={gap:.3e})")
    alpha = quadratic_weight(form, data)
    cost = quadratic_shift(w, alpha, data.x)
    grad_norm = float(np.linalg.norm(grad_g(lift, data.y, cost, data)))
    hess_min = min_eigenvalue(hess_g(lift, data.y, cost, data, tensor))
    downstream = downstream_stationarity(lift, cost, data.y, cone)
    scale = max(1.0, float(np.linalg.norm(w)))
    verification = WitnessVerification(
        grad_norm=grad_norm,
        hess_min_eig=hess_min,
        downstream_gap=downstream,
        witness_direction=_worst_direction(cone, w, seed),
        passed=(grad_norm <= WITNESS_GRAD_TOL * scale and hess_min >= -WITNESS_HESS_TOL * scale
                and downstream <= -settings.WITNESS_GAP_TOL),
    )
    if not verification.passed:
        logger.warning(f"Quadratic witness for {lift.name} failed verification: {verification}")
    return WitnessCost(
        kind=WitnessKind.QUADRATIC,
        w=w.tolist(),
        alpha=alpha,
        center=data.x.tolist(),
        verification=verification,
    )


def check_chain(lift: Lift, y, cone: TangentCone, data: LQData | None = None,
                tensor: np.ndarray | None = None, seed=0, policy: TolerancePolicy | None = None,
                one_to_one: Verdict | None = None) -> dict[ChainLink, PropertyVerdict]:
    """Verdicts for A-sufficient, B-dual-sufficient, W-condition (2=>1) and the necessary condition."""
    data, tensor = chain.prepare(lift, y, data, tensor, policy)
    necessary = chain.necessary_condition(data, tensor, cone, seed, policy)
    w_link = chain.w_condition(data, tensor, cone, seed, policy, necessary)
    if w_link.verdict == Verdict.FAILS:
        try:
            witness = witness_quadratic_cost(lift, data.y, w_link.evidence["witness_w"], cone, data, tensor, policy, seed)
        except LiftException as exc:
            witness, w_link.evidence["witness_error"] = None, exc.detail
        if witness is not None and witness.verification.passed:
            w_link.witness = witness
        else:
            w_link.verdict = Verdict.INCONCLUSIVE
    links = {
        ChainLink.A_SUFFICIENT: chain.a_sufficient(lift, data, tensor, cone, seed, policy),
        ChainLink.B_DUAL_SUFFICIENT: chain.b_dual_sufficient(lift, data, cone),
        ChainLink.W_CONDITION: w_link,
        ChainLink.NECESSARY: necessary,
    }
    return chain.infer_chain(links, one_to_one)


def _sequence_evidence(entry: CatalogEntry, y: np.ndarray, x: np.ndarray, seed) -> dict:
    try:
        sequence = pathological_sequence(entry, y, seed)
    except NoPathologyException as exc:
        return {"sequence": None, "reason": exc.detail}
    steps, distances, feasible = [], [], True
    for i in SLP_INDICES:
        x_i = np.asarray(sequence.point(i), dtype=float).reshape(-1)
        feasible = feasible and bool(entry.set_desc.is_feasible(x_i, 1e-8))
        steps.append(float(np.linalg.norm(x_i - x)))
        if entry.fiber_distance is not None:
            distances.append(fiber_distance(entry, y, x_i))
    evidence = {
        "sequence": sequence.label,
        "indices": list(SLP_INDICES),
        "steps": steps,
        "steps_ok": all(step <= 1.0 / i + 1e-12 for step, i in zip(steps, SLP_INDICES)),
        "feasible": feasible,
    }
    if distances:
        evidence["fiber_distances"] = distances
        evidence["margin_held"] = min(distances) >= SLP_MARGIN
    return evidence


def local_to_local_verdict(entry: CatalogEntry | None, y, seed=0) -> PropertyVerdict:
    """local=>local from the entry's classification, with pathological-sequence evidence when it fails."""
    if entry is None:
        return PropertyVerdict(verdict=Verdict.INCONCLUSIVE, evidence={"reason": "not a catalog lift"})
    y = np.asarray(y, dtype=float).reshape(-1)
    predicate = entry.expected.get(Property.LOCAL_TO_LOCAL)
    expected = predicate(y) if predicate is not None else None
    if expected is None:
        return PropertyVerdict(verdict=Verdict.INCONCLUSIVE, evidence={"reason": "not decided by classification"})
    if expected:
        return PropertyVerdict(verdict=Verdict.HOLDS, evidence={"source": "classification"})
    x = np.asarray(entry.lift.phi(y), dtype=float).reshape(-1)
    evidence = {"source": "classification", **_sequence_evidence(entry, y, x, seed)}
    return PropertyVerdict(verdict=Verdict.FAILS, evidence=evidence)


def verdict_matches(verdict: PropertyVerdict, expected: bool | None) -> bool:
    if expected is None:
        return True
    return verdict.verdict == (Verdict.HOLDS if expected else Verdict.FAILS)


def build_report(lift: Lift, y, set_desc: SetDesc, entry: CatalogEntry | None = None, seed=0,
                 policy: TolerancePolicy | None = None) -> PropertyReport:
    """Every property verdict at y, with the chain and, for catalog entries, the expected classification."""
    data = lq(lift, y, policy)
    cone = cone_at(set_desc, data.x, policy)
    tensor = polarization_tensor(lift, data.y, data, policy)
    one = check_one_implies_one(lift, data.y, cone, data, seed)
    links = check_chain(lift, data.y, cone, data, tensor, seed, policy, one.verdict)
    verdicts = {
        Property.ONE_TO_ONE: one,
        Property.TWO_TO_ONE: links[ChainLink.W_CONDITION].model_copy(deep=True),
        Property.LOCAL_TO_LOCAL: local_to_local_verdict(entry, data.y, seed),
    }
    expected = matches = None
    if entry is not None:
        expected = expected_verdicts(entry, data.y)
        matches = all(verdict_matches(verdicts[prop], value) for prop, value in expected.items())
        if not matches:
            logger.warning(f"{lift.name}: verdicts differ from the classification at {point_digest(data.y)[:12]}")
    logger.info(
        f"{lift.name}: 1=>1 {one.verdict.value}, 2=>1 {verdicts[Property.TWO_TO_ONE].verdict.value}, "
        f"local=>local {verdicts[Property.LOCAL_TO_LOCAL].verdict.value}"
    )
    return PropertyReport(
        lift=lift.name,
        point_digest=point_digest(data.y),
        verdicts=verdicts,
        chain=links,
        expected=expected,
        matches_expected=matches,
    )


def collect_witnesses(lift: Lift, y, set_desc: SetDesc, seed=0,
                      policy: TolerancePolicy | None = None) -> list[WitnessCost]:
    """Linear witness when 1=>1 fails and quadratic witness when 2=>1 fails, without the A and B links."""
    data = lq(lift, y, policy)
    cone = cone_at(set_desc, data.x, policy)
    tensor = polarization_tensor(lift, data.y, data, policy)
    witnesses = []
    one = check_one_implies_one(lift, data.y, cone, data, seed)
    if one.witness is not None:
        witnesses.append(one.witness)
    necessary = chain.necessary_condition(data, tensor, cone, seed, policy)
    w_link = chain.w_condition(data, tensor, cone, seed, policy, necessary)
    if w_link.verdict == Verdict.FAILS:
        witnesses.append(
            witness_quadratic_cost(lift, data.y, w_link.evidence["witness_w"], cone, data, tensor, policy, seed)
        )
    logger.info(f"{lift.name}: {len(witnesses)} witness costs")
    return witnesses
