import numpy as np
import pytest

from src.catalog.constants import EntryId
from src.catalog.service import (
    build,
    degenerate_directions,
    degenerate_targets,
    expected_verdicts,
    fiber_distance,
    list_entries,
    pathological_sequence,
    regimes,
    sample_point,
)
from src.checker.constants import Property
from src.checker.service import build_report
from src.common.exceptions import InvalidInputException, NoDegeneracyException, NoPathologyException
from src.manifold.service import is_on_manifold

# L full rank, R of rank one: phi(y) has rank one
LR_LEFT = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
LR_RIGHT = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
LR_POINT = np.concatenate([LR_LEFT.reshape(-1), LR_RIGHT.reshape(-1)])


def test_every_entry_builds_with_defaults():
    listing = list_entries()
    assert [item["id"] for item in listing] == [e.value for e in EntryId]
    assert all(item["regimes"] for item in listing)


@pytest.mark.parametrize("entry_id", list(EntryId))
def test_regime_points_lie_on_manifold(entry_id, rng):
    entry = build(entry_id)
    for regime in regimes(entry):
        y = sample_point(entry, regime, rng)
        assert is_on_manifold(entry.lift.manifold, y)
        verdicts = expected_verdicts(entry, y)
        assert set(verdicts) <= set(Property)
        assert all(value is None or isinstance(value, bool) for value in verdicts.values())


def test_unknown_entry_and_parameters_are_rejected():
    with pytest.raises(InvalidInputException):
        build("klein_bottle")
    with pytest.raises(InvalidInputException):
        build("hadamard", rank=2)


def test_invalid_dimensions_are_rejected():
    with pytest.raises(InvalidInputException):
        build("lr", m=3, n=3, r=3)


def test_unknown_regime_is_rejected(hadamard_entry):
    with pytest.raises(InvalidInputException):
        sample_point(hadamard_entry, "exterior", 0)


def test_hadamard_classification(hadamard_entry):
    assert expected_verdicts(hadamard_entry, [0.6, 0.8, 0.0])[Property.ONE_TO_ONE] is False
    assert expected_verdicts(hadamard_entry, [0.6, 0.0, 0.8])[Property.TWO_TO_ONE] is True
    interior = np.full(3, 1.0 / np.sqrt(3.0))
    assert expected_verdicts(hadamard_entry, interior)[Property.ONE_TO_ONE] is True


def test_lr_degenerate_directions_have_rate_one_over_i():
    entry = build("lr", m=4, n=3, r=2)
    lift = entry.lift
    targets = degenerate_targets(entry, LR_POINT)
    assert targets.shape[1] == 12
    norms = []
    for i in (1, 2, 4, 8):
        v = degenerate_directions(entry, LR_POINT, i)
        norms.append(np.linalg.norm(lift.dphi(LR_POINT, v)))
        assert np.allclose(lift.d2phi(LR_POINT, v), targets[0])
    assert norms[0] > 0
    assert np.allclose(np.array(norms) * np.array([1, 2, 4, 8]), norms[0])


def test_full_rank_lr_point_has_no_degenerate_directions(rng):
    entry = build("lr")
    with pytest.raises(NoDegeneracyException):
        degenerate_directions(entry, sample_point(entry, "full_rank", rng), 1)


def test_lr_pathological_sequence_stays_away_from_fiber():
    entry = build("lr", m=4, n=3, r=2)
    x = entry.lift.phi(LR_POINT)
    sequence = pathological_sequence(entry, LR_POINT, seed=0)
    for i in (4, 16, 64):
        x_i = sequence.point(i)
        assert entry.set_desc.is_feasible(x_i, 1e-8)
        assert np.linalg.norm(x_i - x) <= 1.0 / i + 1e-12
        assert fiber_distance(entry, LR_POINT, x_i) >= 0.1


def test_open_point_has_no_pathological_sequence(rng):
    entry = build("lr")
    with pytest.raises(NoPathologyException):
        pathological_sequence(entry, sample_point(entry, "full_rank", rng))


def test_nodal_sequence_follows_the_other_branch(nodal_entry):
    y = np.array([0.0, 0.0, -1.0])
    sequence = pathological_sequence(nodal_entry, y)
    for i in (4, 32):
        x_i = sequence.point(i)
        assert nodal_entry.set_desc.is_feasible(x_i, 1e-8)
        assert np.linalg.norm(x_i) <= 1.0 / i
        assert fiber_distance(nodal_entry, y, x_i) >= 1.9


def test_disk_quartic_classification(disk_entry):
    boundary = expected_verdicts(disk_entry, [1.0, 0.0, 0.0])
    assert boundary[Property.TWO_TO_ONE] is False
    assert boundary[Property.LOCAL_TO_LOCAL] is True


def test_cp_rank1_origin_classification():
    entry = build("cp_rank1", dims=(2, 2, 2))
    verdicts = expected_verdicts(entry, np.zeros(6))
    assert verdicts[Property.TWO_TO_ONE] is False
    assert verdicts[Property.LOCAL_TO_LOCAL] is None


ENTRY_REGIMES = [(entry_id, regime) for entry_id in EntryId for regime in regimes(build(entry_id))]


@pytest.mark.parametrize(("entry_id", "regime"), ENTRY_REGIMES)
@pytest.mark.parametrize("seed", range(3))
def test_report_matches_expected_classification(entry_id, regime, seed):
    entry = build(entry_id)
    y = sample_point(entry, regime, seed)
    report = build_report(entry.lift, y, entry.set_desc, entry, seed=seed)
    assert report.matches_expected is True
