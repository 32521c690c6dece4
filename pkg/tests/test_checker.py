import numpy as np
import pytest

from src.catalog.service import build
from src.checker import chain
from src.checker.constants import ChainLink, Property, Verdict, WitnessKind
from src.checker.schemas import PropertyVerdict
from src.checker.service import (
    build_report,
    check_chain,
    collect_witnesses,
    local_to_local_verdict,
    point_digest,
    verdict_matches,
    witness_quadratic_cost,
)
from src.common.exceptions import InvalidWitnessException
from src.cones.service import cone_at
from src.lift.service import lq, polarization_tensor
from src.optimize.costs import quadratic_shift

DISK_EDGE = np.array([1.0, 0.0, 0.0])
NODE = np.array([0.0, 0.0, -1.0])
FACE = np.array([0.0, 0.6, 0.8])


def _verdicts(**links):
    return {link: PropertyVerdict(verdict=links.get(link.name, Verdict.INCONCLUSIVE)) for link in ChainLink}


def test_disk_witness_makes_edge_point_two_critical(disk_entry):
    lift = disk_entry.lift
    cone = cone_at(disk_entry.set_desc, lift.phi(DISK_EDGE))
    witness = witness_quadratic_cost(lift, DISK_EDGE, [1.0, 0.0], cone)
    assert witness.kind == WitnessKind.QUADRATIC
    assert witness.alpha == pytest.approx(2.0)
    check = witness.verification
    assert check.grad_norm <= 1e-10
    assert check.hess_min_eig >= -1e-8
    assert check.downstream_gap <= -0.99
    assert check.passed


def test_witness_rejects_direction_in_image(disk_entry):
    lift = disk_entry.lift
    cone = cone_at(disk_entry.set_desc, lift.phi(DISK_EDGE))
    with pytest.raises(InvalidWitnessException):
        witness_quadratic_cost(lift, DISK_EDGE, [0.0, 1.0], cone)


def test_witness_rejects_stationary_direction(disk_entry):
    lift = disk_entry.lift
    cone = cone_at(disk_entry.set_desc, lift.phi(DISK_EDGE))
    with pytest.raises(InvalidWitnessException):
        witness_quadratic_cost(lift, DISK_EDGE, [-1.0, 0.0], cone)


def test_disk_edge_report_matches_classification(disk_entry):
    report = build_report(disk_entry.lift, DISK_EDGE, disk_entry.set_desc, disk_entry)
    assert report.matches_expected is True
    two = report.verdicts[Property.TWO_TO_ONE]
    assert two.verdict == Verdict.FAILS
    assert two.witness is not None and two.witness.verification.passed
    assert report.chain[ChainLink.NECESSARY].verdict == Verdict.HOLDS
    assert report.chain[ChainLink.A_SUFFICIENT].verdict == Verdict.FAILS
    assert report.verdicts[Property.LOCAL_TO_LOCAL].verdict == Verdict.HOLDS


def test_nodal_witness_has_strict_local_minimum_at_node(nodal_entry):
    lift = nodal_entry.lift
    witnesses = collect_witnesses(lift, NODE, nodal_entry.set_desc)
    quadratic = [w for w in witnesses if w.kind == WitnessKind.QUADRATIC]
    assert len(quadratic) == 1
    witness = quadratic[0]
    assert witness.verification.passed
    assert witness.verification.downstream_gap == pytest.approx(-1.0)
    cost = quadratic_shift(witness.w, witness.alpha, witness.center)
    ts = np.linspace(-1.2, -0.8, 401)
    g = [cost(lift.phi(np.array([t * t - 1.0, t ** 3 - t, t]))) for t in ts]
    assert int(np.argmin(g)) == 200


def test_nodal_node_report(nodal_entry):
    report = build_report(nodal_entry.lift, NODE, nodal_entry.set_desc, nodal_entry)
    assert report.matches_expected is True
    local = report.verdicts[Property.LOCAL_TO_LOCAL]
    assert local.verdict == Verdict.FAILS
    assert local.evidence["steps_ok"] and local.evidence["feasible"] and local.evidence["margin_held"]


def test_cp_rank1_origin_fails_necessary_condition():
    entry = build("cp_rank1", dims=(2, 2, 2))
    y = np.zeros(6)
    links = check_chain(entry.lift, y, cone_at(entry.set_desc, np.zeros(8)))
    assert links[ChainLink.NECESSARY].verdict == Verdict.FAILS
    assert links[ChainLink.W_CONDITION].verdict == Verdict.FAILS
    assert links[ChainLink.B_DUAL_SUFFICIENT].inferred
    report = build_report(entry.lift, y, entry.set_desc, entry)
    assert report.matches_expected is True


def test_hadamard_face_report(hadamard_entry):
    report = build_report(hadamard_entry.lift, FACE, hadamard_entry.set_desc, hadamard_entry)
    assert report.verdicts[Property.ONE_TO_ONE].verdict == Verdict.FAILS
    assert report.verdicts[Property.ONE_TO_ONE].witness.verification.passed
    assert report.verdicts[Property.TWO_TO_ONE].verdict == Verdict.HOLDS
    assert report.matches_expected is True


def test_a_set_membership_on_simplex_face(hadamard_entry):
    lift = hadamard_entry.lift
    assert chain.a_set_contains(lift, FACE, [1.0, -0.5, -0.5]) is True
    assert chain.a_set_contains(lift, FACE, [-1.0, 0.5, 0.5]) is False


def test_w_set_member_at_disk_edge(disk_entry):
    assert chain.w_set_member(disk_entry.lift, DISK_EDGE, [1.0, 0.0])
    assert chain.w_set_member(disk_entry.lift, DISK_EDGE, [-1.0, 0.0])


def test_lr_degenerate_family_certifies_b_link():
    entry = build("lr", m=4, n=3, r=2)
    y = np.concatenate([
        np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]]).reshape(-1),
        np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]).reshape(-1),
    ])
    data = lq(entry.lift, y)
    cone = cone_at(entry.set_desc, data.x)
    verdict = chain.b_dual_sufficient(entry.lift, data, cone)
    assert verdict.verdict == Verdict.HOLDS
    assert verdict.evidence["rate_ok"] and verdict.evidence["target_ok"]
    links = check_chain(entry.lift, y, cone, data, polarization_tensor(entry.lift, y, data))
    assert links[ChainLink.W_CONDITION].verdict == Verdict.HOLDS


def test_failure_propagates_backward():
    links = chain.infer_chain(_verdicts(A_SUFFICIENT=Verdict.HOLDS, NECESSARY=Verdict.FAILS))
    assert all(links[link].verdict == Verdict.FAILS for link in ChainLink)
    assert links[ChainLink.B_DUAL_SUFFICIENT].inferred


def test_overridden_sample_keeps_its_contradiction():
    links = _verdicts(A_SUFFICIENT=Verdict.HOLDS, W_CONDITION=Verdict.FAILS)
    links[ChainLink.A_SUFFICIENT].evidence = {"directions": 8, "checked": 8}
    inferred = chain.infer_chain(links)
    a_link = inferred[ChainLink.A_SUFFICIENT]
    assert a_link.verdict == Verdict.FAILS and a_link.inferred
    assert a_link.evidence["implied_by"] == ChainLink.W_CONDITION.value
    assert a_link.evidence["contradicted_sample"] is True
    assert a_link.evidence["sampled_verdict"] == "holds"
    assert a_link.evidence["sampled_evidence"] == {"directions": 8, "checked": 8}
    # B was never sampled as holding
    assert "contradicted_sample" not in inferred[ChainLink.B_DUAL_SUFFICIENT].evidence


def test_holds_propagates_forward_only():
    links = chain.infer_chain(_verdicts(B_DUAL_SUFFICIENT=Verdict.HOLDS))
    assert links[ChainLink.A_SUFFICIENT].verdict == Verdict.INCONCLUSIVE
    assert links[ChainLink.W_CONDITION].verdict == Verdict.HOLDS
    assert links[ChainLink.NECESSARY].verdict == Verdict.HOLDS


def test_one_to_one_implies_w_but_not_b():
    links = chain.infer_chain(_verdicts(), one_to_one=Verdict.HOLDS)
    assert links[ChainLink.W_CONDITION].verdict == Verdict.HOLDS
    assert links[ChainLink.NECESSARY].verdict == Verdict.HOLDS
    assert links[ChainLink.B_DUAL_SUFFICIENT].verdict == Verdict.INCONCLUSIVE


def test_point_digest_is_stable():
    assert point_digest([0.0, 1.0]) == point_digest(np.array([-0.0, 1.0]))
    assert point_digest([0.0, 1.0]) != point_digest([0.0, 1.0 + 1e-6])


def test_local_verdict_without_catalog_entry():
    assert local_to_local_verdict(None, FACE).verdict == Verdict.INCONCLUSIVE


def test_verdict_matches():
    holds = PropertyVerdict(verdict=Verdict.HOLDS)
    assert verdict_matches(holds, True)
    assert not verdict_matches(holds, False)
    assert verdict_matches(holds, None)
