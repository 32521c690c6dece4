import numpy as np
import pytest

from src.catalog.service import build, preimage_set, sample_point
from src.common.exceptions import InvalidInputException, SamplerExhaustedException
from src.cones.constants import ConeKind
from src.cones.models import IntersectSlice, LineUnion, ProductCone, PsdRankCone, Subspace
from src.cones.service import (
    cone_at,
    empirical_tangents,
    is_linear,
    member,
    sample_directions,
    stationarity_gap,
)
from src.cones.sets import (
    Ball,
    BoundedRank,
    NodalCubic,
    Orthant,
    Preimage,
    ProductSet,
    PsdBoundedRank,
    RankOneTensors,
    Simplex,
)
from src.lift.models import SmoothMap

FACE = np.array([0.0, 0.36, 0.64])


def test_simplex_interior_cone_is_linear():
    cone = cone_at(Simplex(3), np.array([0.2, 0.3, 0.5]))
    assert is_linear(cone)
    assert cone.basis.shape == (3, 2)


def test_simplex_face_cone_is_polyhedral():
    cone = cone_at(Simplex(3), FACE)
    assert cone.kind == ConeKind.POLYHEDRAL
    assert member(cone, np.array([1.0, -1.0, 0.0])).inside
    assert not member(cone, np.array([-1.0, 1.0, 0.0])).inside


def test_stationarity_gap_on_simplex_face():
    cone = cone_at(Simplex(3), FACE)
    # pushing against the active constraint is stationary
    assert stationarity_gap(cone, np.array([1.0, 0.0, 0.0])) == pytest.approx(0.0, abs=1e-8)
    assert stationarity_gap(cone, np.array([-1.0, 0.0, 0.0])) == pytest.approx(-np.sqrt(6.0) / 3.0)


def test_subspace_gap_is_norm_of_projection():
    cone = Subspace(np.eye(3)[:, :2])
    assert stationarity_gap(cone, np.array([3.0, 4.0, 12.0])) == pytest.approx(-5.0)


def test_infeasible_point_is_rejected():
    with pytest.raises(InvalidInputException):
        cone_at(Simplex(3), np.array([0.5, 0.5, 0.5]))


def test_ball_boundary_cone():
    cone = cone_at(Ball(2), np.array([1.0, 0.0]))
    assert not is_linear(cone)
    assert member(cone, np.array([-1.0, 0.0])).inside
    assert member(cone, np.array([0.0, 1.0])).inside
    assert not member(cone, np.array([1.0, 0.0])).inside


def test_orthant_corner_samples_stay_in_cone():
    cone = cone_at(Orthant(3), np.zeros(3))
    directions = sample_directions(cone, 20, seed=3)
    assert len(directions) == 20
    assert all(np.all(d >= -1e-10) for d in directions)
    assert all(np.linalg.norm(d) == pytest.approx(1.0) for d in directions)


def test_nodal_cubic_node_has_two_lines():
    cone = cone_at(NodalCubic(), np.zeros(2))
    assert isinstance(cone, LineUnion)
    assert member(cone, np.array([1.0, -1.0]) / np.sqrt(2.0)).inside
    assert not member(cone, np.array([1.0, 0.0])).inside
    assert stationarity_gap(cone, np.array([1.0, 0.0])) == pytest.approx(-1.0 / np.sqrt(2.0))


def test_bounded_rank_cone_at_lower_rank_point(rng):
    x = np.outer(rng.standard_normal(4), rng.standard_normal(3)).reshape(-1)
    cone = cone_at(BoundedRank(4, 3, 2), x)
    assert cone.kind == ConeKind.BOUNDED_RANK
    rank_one = np.outer(rng.standard_normal(4), rng.standard_normal(3)).reshape(-1)
    assert member(cone, rank_one).inside


def test_rank_one_tensors_at_origin():
    cone = cone_at(RankOneTensors((2, 2, 2)), np.zeros(8))
    assert cone.kind == ConeKind.RANK_ONE_TENSOR
    e = np.zeros(8)
    e[0] = 1.0
    assert stationarity_gap(cone, e) == pytest.approx(-1.0, abs=1e-8)


def test_empirical_tangents_lie_in_cone():
    cone = cone_at(Simplex(3), FACE)
    for d in empirical_tangents(Simplex(3), FACE, 10, seed=4):
        assert cone.violation(d) <= 1e-6


def test_empirical_tangents_report_exhaustion():
    class Stuck(Simplex):
        def sample_near(self, x, radius, rng):
            return None

    with pytest.raises(SamplerExhaustedException):
        empirical_tangents(Stuck(3), FACE, 3)


def _rank_one_psd(rng, n=4):
    u = rng.standard_normal(n)
    return np.outer(u, u).reshape(-1)


def test_psd_bounded_rank_secants_satisfy_the_block_condition(rng):
    set_desc = PsdBoundedRank(4, 2)
    x = _rank_one_psd(rng)
    cone = cone_at(set_desc, x)
    assert isinstance(cone, PsdRankCone)
    assert cone.s == 1
    tangents = empirical_tangents(set_desc, x, 500, seed=11)
    assert len(tangents) == 500
    assert all(member(cone, d, tol=1e-3).inside for d in tangents)


def test_psd_rank_cone_rejects_matrices_outside_the_block_condition(rng):
    cone = cone_at(PsdBoundedRank(4, 2), _rank_one_psd(rng))
    u1, p0, p1 = cone.u[:, 0], cone.u[:, 1], cone.u[:, 2]
    # the kernel block must be PSD
    assert not member(cone, -np.outer(p0, p0).reshape(-1)).inside
    # and of rank at most r - s = 1
    assert not member(cone, (np.outer(p0, p0) + np.outer(p1, p1)).reshape(-1)).inside
    assert not member(cone, (np.outer(p0, u1) - np.outer(u1, p0)).reshape(-1)).inside
    assert member(cone, (np.outer(p0, p0) + np.outer(u1, p1) + np.outer(p1, u1)).reshape(-1)).inside


def test_psd_rank_cone_gap_is_below_every_sampled_direction(rng):
    set_desc = PsdBoundedRank(4, 2)
    x = _rank_one_psd(rng)
    cone = cone_at(set_desc, x)
    directions = sample_directions(cone, 500, seed=12)
    tangents = empirical_tangents(set_desc, x, 200, seed=13)
    for _ in range(10):
        g = rng.standard_normal((4, 4))
        w = (0.5 * (g + g.T)).reshape(-1)
        gap = stationarity_gap(cone, w)
        assert gap >= -np.linalg.norm(w) - 1e-12
        assert gap <= min(float(w @ d) for d in directions) + 1e-9
        assert gap <= min(float(w @ d) for d in tangents) + 1e-3 * np.linalg.norm(w)


@pytest.mark.parametrize("seed", range(5))
def test_psd_lowrank_entry_secants_lie_in_its_cone(seed):
    entry = build("psd_lowrank")
    x = entry.lift.phi(sample_point(entry, "rank_deficient", seed))
    cone = cone_at(entry.set_desc, x)
    assert isinstance(cone, PsdRankCone)
    for d in empirical_tangents(entry.set_desc, x, 100, seed=seed):
        assert member(cone, d, tol=1e-3).inside


@pytest.mark.parametrize("seed", range(3))
def test_sdp_slice_tangents_respect_the_constraints(seed):
    entry = build("burer_monteiro", n=4, r=2, m=2)
    x = entry.lift.phi(sample_point(entry, "rank_deficient", seed))
    cone = cone_at(entry.set_desc, x)
    assert isinstance(cone, IntersectSlice)
    constraints = entry.set_desc.constraints
    for d in sample_directions(cone, 200, seed=seed):
        assert np.linalg.norm(constraints @ d) <= 1e-6
        assert cone.base.violation(d) <= 1e-8
    for d in empirical_tangents(entry.set_desc, x, 200, seed=seed):
        assert np.linalg.norm(constraints @ d) <= 1e-6
        assert member(cone.base, d, tol=1e-3).inside


def test_sdp_slice_at_full_rank_is_a_subspace_of_the_constraint_kernel():
    entry = build("burer_monteiro", n=4, r=2, m=2)
    x = entry.lift.phi(sample_point(entry, "full_rank", 4))
    cone = cone_at(entry.set_desc, x)
    assert is_linear(cone)
    assert np.allclose(entry.set_desc.constraints @ cone.basis, 0.0, atol=1e-9)


@pytest.mark.parametrize(("entry_id", "regime"), [
    ("ball", "interior"),
    ("ball", "boundary"),
    ("annulus", "interior"),
    ("annulus", "inner_boundary"),
    ("annulus", "outer_boundary"),
])
def test_preimage_cone_matches_direct_cone(entry_id, regime, rng):
    entry = build(entry_id)
    pulled = preimage_set(entry)
    for seed in range(3):
        x = entry.lift.phi(sample_point(entry, regime, seed))
        direct, via_map = cone_at(entry.set_desc, x), cone_at(pulled, x)
        assert is_linear(direct) == is_linear(via_map)
        for _ in range(10):
            w = rng.standard_normal(x.size)
            assert stationarity_gap(via_map, w) == pytest.approx(stationarity_gap(direct, w), abs=1e-9)


def test_preimage_of_non_fiber_product_entry_is_rejected():
    with pytest.raises(InvalidInputException):
        preimage_set(build("hadamard"))


def test_preimage_without_constraint_qualification_is_rejected():
    # {x : -|x|^2 >= 0} is the origin, where DF vanishes
    F = SmoothMap(
        in_dim=2,
        out_dim=1,
        value=lambda x: np.array([-(x @ x)]),
        jvp=lambda x, v: np.array([-2.0 * (x @ v)]),
        hvp=lambda x, v: np.array([-2.0 * (v @ v)]),
    )
    with pytest.raises(InvalidInputException):
        cone_at(Preimage(F=F, base=Orthant(1)), np.zeros(2))


def test_product_set_cone_combines_factor_gaps():
    product_set = ProductSet((Simplex(3), Ball(2)))
    x = np.concatenate([FACE, [1.0, 0.0]])
    cone = cone_at(product_set, x)
    assert isinstance(cone, ProductCone)
    w = np.array([-1.0, 0.0, 0.0, 1.0, 0.0])
    simplex_gap = stationarity_gap(cone_at(Simplex(3), FACE), w[:3])
    ball_gap = stationarity_gap(cone_at(Ball(2), np.array([1.0, 0.0])), w[3:])
    assert ball_gap == pytest.approx(-1.0, abs=1e-8)
    assert stationarity_gap(cone, w) == pytest.approx(-np.hypot(simplex_gap, ball_gap), abs=1e-8)
    assert stationarity_gap(cone, w) == pytest.approx(-np.sqrt(15.0) / 3.0, abs=1e-8)


def test_product_set_cone_in_the_interior_is_block_diagonal():
    cone = cone_at(ProductSet((Simplex(3), Ball(2))), np.array([0.2, 0.3, 0.5, 0.1, 0.2]))
    assert is_linear(cone)
    assert cone.basis.shape == (5, 4)
    assert np.allclose(cone.basis[:3, 2:], 0.0) and np.allclose(cone.basis[3:, :2], 0.0)
