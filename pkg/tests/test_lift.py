import numpy as np
import pytest

from src.catalog.constants import EntryId
from src.catalog.service import build, regimes, sample_point
from src.common.exceptions import InvalidInputException, NotCoexactException, NotSubmersionException
from src.lift.combinators import compose_submersion, product
from src.lift.constants import TAYLOR_FIRST_ORDER_SLOPE, TAYLOR_SECOND_ORDER_SLOPE
from src.lift.models import SmoothMap, Submersion
from src.lift.service import (
    coexact_part,
    form_from_tensor,
    lq,
    polarization_tensor,
    qform_matrix,
    qmap,
    taylor_residuals,
    value,
)
from src.manifold.models import Sphere

BOUNDARY = np.array([0.0, 0.6, 0.8])


def test_lq_at_simplex_boundary(hadamard_entry):
    data = lq(hadamard_entry.lift, BOUNDARY)
    assert data.tangent_dim == 2
    assert data.rank == 1
    kernel = data.lift_coords(data.ker_l_basis[:, 0])
    assert np.allclose(np.abs(kernel), [1.0, 0.0, 0.0])
    assert np.allclose(data.x, BOUNDARY ** 2)


def test_qmap_includes_second_order_correction(hadamard_entry):
    q = qmap(hadamard_entry.lift, BOUNDARY, np.array([1.0, 0.0, 0.0]))
    assert np.allclose(q, [2.0, -0.72, -1.28])


def test_polarization_tensor_is_symmetric_and_matches_qmap(hadamard_entry):
    lift = hadamard_entry.lift
    data = lq(lift, BOUNDARY)
    tensor = polarization_tensor(lift, BOUNDARY, data)
    assert np.allclose(tensor, tensor.transpose(1, 0, 2))
    coords = np.array([0.3, -0.7])
    expected = qmap(lift, BOUNDARY, data.lift_coords(coords))
    assert np.allclose(np.einsum("i,j,ijk->k", coords, coords, tensor), expected)


def test_qform_matrix_on_normal_direction(hadamard_entry):
    lift = hadamard_entry.lift
    data = lq(lift, BOUNDARY)
    w = data.normal_basis[:, 0]
    form = qform_matrix(lift, BOUNDARY, w, data)
    assert np.allclose(form, form_from_tensor(polarization_tensor(lift, BOUNDARY, data), w))


def test_coexact_part_rejects_vectors_in_image(hadamard_entry):
    data = lq(hadamard_entry.lift, BOUNDARY)
    with pytest.raises(NotCoexactException):
        coexact_part(data, data.im_l_basis[:, 0])


def test_value_requires_point_on_manifold(hadamard_entry):
    with pytest.raises(InvalidInputException):
        value(hadamard_entry.lift, np.ones(3))


def test_taylor_residuals_have_expected_slopes(rng):
    entry = build("lr", m=4, n=3, r=2)
    report = taylor_residuals(entry.lift, sample_point(entry, "full_rank", rng), seed=1)
    assert report.passed
    assert report.first_slope is None or report.first_slope >= 1.9


def test_taylor_residuals_on_curved_manifold(rng):
    entry = build("disk_quartic")
    report = taylor_residuals(entry.lift, sample_point(entry, "interior", rng), seed=2)
    assert report.passed


def test_finite_difference_smooth_map_matches_exact_derivative():
    exact = SmoothMap(in_dim=2, out_dim=1, value=lambda x: np.array([x[0] ** 2 * x[1]]),
                      jvp=lambda x, v: np.array([2 * x[0] * x[1] * v[0] + x[0] ** 2 * v[1]]))
    approx = SmoothMap(in_dim=2, out_dim=1, value=exact.value)
    x, v = np.array([1.5, -0.5]), np.array([0.2, 1.0])
    assert approx.uses_finite_differences
    assert np.allclose(approx.derivative(x, v), exact.derivative(x, v), atol=1e-8)


def test_compose_submersion_guards_rank(hadamard_entry):
    constant = Submersion(
        domain=Sphere(2),
        map=SmoothMap(in_dim=3, out_dim=3, value=lambda z: np.array([1.0, 0.0, 0.0]),
                      jvp=lambda z, v: np.zeros(3), hvp=lambda z, v: np.zeros(3), name="const"),
    )
    lift = compose_submersion(hadamard_entry.lift, constant)
    with pytest.raises(NotSubmersionException):
        lq(lift, np.array([0.0, 0.0, 1.0]))


def test_product_lift_concatenates_factors(hadamard_entry):
    squaring = build("squaring", n=2).lift
    lift = product([hadamard_entry.lift, squaring])
    y = np.concatenate([BOUNDARY, [2.0, -1.0]])
    assert np.allclose(value(lift, y), np.concatenate([BOUNDARY ** 2, [4.0, 1.0]]))
    data = lq(lift, y)
    assert data.tangent_dim == 4
    assert data.rank == 3


@pytest.mark.parametrize("entry_id", list(EntryId))
@pytest.mark.parametrize("seed", range(3))
def test_taylor_slopes_on_every_entry(entry_id, seed):
    entry = build(entry_id)
    for regime in regimes(entry):
        report = taylor_residuals(entry.lift, sample_point(entry, regime, seed), seed=seed)
        assert report.passed, (regime, report.first_slope, report.second_slope)
        assert report.first_slope is None or report.first_slope >= TAYLOR_FIRST_ORDER_SLOPE
        assert report.second_slope is None or report.second_slope >= TAYLOR_SECOND_ORDER_SLOPE
