import math

import numpy as np
import pytest

from renewlab.errors import DomainError
from renewlab.maps import (
    affine_fiber,
    build_return_partition,
    check_hyperbolicity,
    coverage_check,
    default_skew,
    induced_apply,
    induced_derivative,
    left_branch_preimage,
    left_preimage_array,
    lsv,
    lsv_apply,
    map_spec_from_config,
    map_spec_to_config,
    nonmarkov_default,
    skew_induced_apply,
)
from renewlab.schemas import MapConfig

ALPHA = 4.0 / 3.0


class TestIntervalMaps:
    def test_lsv_branches(self):
        assert lsv_apply(0.25, 1.0) == pytest.approx(0.375)
        assert lsv_apply(0.75, ALPHA) == pytest.approx(0.5)
        assert lsv_apply(0.5, ALPHA) == pytest.approx(1.0)
        assert lsv_apply(0.0, ALPHA) == 0.0

    @pytest.mark.parametrize("x, alpha", [(1.5, ALPHA), (-0.1, ALPHA), (0.3, 0.0)])
    def test_lsv_rejects_bad_arguments(self, x, alpha):
        with pytest.raises(DomainError):
            lsv_apply(x, alpha)

    @pytest.mark.parametrize("x", [1e-6, 0.1, 0.3, 0.4999])
    def test_left_preimage_inverts_branch(self, x):
        assert left_branch_preimage(lsv_apply(x, ALPHA), ALPHA) == pytest.approx(x, abs=1e-12)

    def test_preimage_of_half_at_alpha_one(self):
        # x (1 + 2x) = 1/2 has the closed form (sqrt(5) - 1) / 4
        assert left_branch_preimage(0.5, 1.0) == pytest.approx((math.sqrt(5.0) - 1.0) / 4.0, abs=1e-12)
        assert left_branch_preimage(0.5, 1.0) == pytest.approx(0.3090170, abs=1e-7)

    def test_vectorized_preimage_matches_scalar(self):
        ys = np.array([1e-4, 0.05, 0.3, 0.7, 1.0])
        expected = [left_branch_preimage(float(y), ALPHA) for y in ys]
        np.testing.assert_allclose(left_preimage_array(ys, ALPHA), expected, atol=1e-12)

    def test_markov_flag(self):
        assert lsv(ALPHA).markov
        assert not nonmarkov_default().markov

    def test_config_round_trip(self):
        spec = nonmarkov_default()
        again = map_spec_from_config(map_spec_to_config(spec))
        assert again.right_branches == spec.right_branches
        assert again.alpha == spec.alpha
        assert map_spec_from_config(MapConfig(kind="lsv", alpha=0.5)).beta == 2.0


class TestReturnPartition:
    def test_first_cell_is_upper_quarter(self, partition):
        top = int(np.argmax(partition.cell_hi))
        assert partition.cell_n[top] == 1
        assert partition.cell_lo[top] == pytest.approx(0.75)
        assert partition.cell_hi[top] == pytest.approx(1.0)

    def test_cells_tile_y(self, partition):
        np.testing.assert_allclose(partition.cell_hi[:-1], partition.cell_lo[1:], rtol=0, atol=1e-15)
        assert not partition.low_coverage
        assert partition.lengths.sum() > 0.99 * 0.5

    def test_locate(self, partition):
        assert list(partition.locate(np.array([0.9, 0.7]))) == [1, 2]

    def test_locate_agrees_with_induced_return(self, lsv_map, partition):
        xs = np.linspace(0.51, 0.99, 40)
        phis = [induced_apply(lsv_map, float(x))[1] for x in xs]
        assert list(partition.locate(xs)) == phis

    def test_second_cell_at_alpha_one(self):
        part = build_return_partition(lsv(1.0), 10)
        (idx,) = np.flatnonzero(part.cell_n == 2)
        assert part.cell_lo[idx] == pytest.approx(0.6545085, abs=1e-7)
        assert part.cell_hi[idx] == pytest.approx(0.75, abs=1e-12)

    def test_shallow_partition_rejected(self, lsv_map):
        with pytest.raises(DomainError):
            build_return_partition(lsv_map, 1)

    def test_nonmarkov_cells_stay_in_branches(self):
        part = build_return_partition(nonmarkov_default(), 500)
        assert set(part.cell_branch.tolist()) == {0, 1}
        assert np.all(part.cell_lo >= 0.5 - 1e-12)
        assert np.all(part.cell_hi <= 1.0 + 1e-12)
        assert np.all(part.cell_hi > part.cell_lo)

    def test_branch_coverage(self, lsv_map):
        assert coverage_check(lsv_map).passed


class TestInducedMap:
    def test_first_returns(self, lsv_map):
        image, phi = induced_apply(lsv_map, 0.9)
        assert phi == 1
        assert image == pytest.approx(0.8)
        _, phi = induced_apply(lsv_map, 0.7)
        assert phi == 2

    def test_outside_y(self, lsv_map):
        with pytest.raises(DomainError):
            induced_apply(lsv_map, 0.4)

    def test_vectorized_derivative(self, lsv_map):
        xs = np.array([0.9, 0.7])
        image, phi, deriv = induced_derivative(lsv_map, xs)
        assert list(phi) == [1, 2]
        assert deriv[0] == pytest.approx(2.0)
        x1 = 0.4
        expected = 2.0 * (1.0 + (1.0 + ALPHA) * (2.0 * x1) ** ALPHA)
        assert deriv[1] == pytest.approx(expected)
        assert image[1] == pytest.approx(lsv_apply(x1, ALPHA))


class TestSkewProducts:
    def test_affine_fiber_range(self):
        with pytest.raises(DomainError):
            affine_fiber(0.7)

    def test_skew_return(self, skew):
        (x, y), n = skew_induced_apply(skew, (0.9, 0.2))
        assert n == 1
        assert x == pytest.approx(0.8)
        assert y == pytest.approx(0.6)

    @pytest.mark.parametrize("x", [0.51, 0.6, 0.6545085, 0.7, 0.75, 0.8123, 0.999])
    def test_base_coordinate_matches_induced_map(self, lsv_map, skew, x):
        (bx, _), n = skew_induced_apply(skew, (x, 0.3))
        image, phi = induced_apply(lsv_map, x)
        assert bx == image
        assert n == phi

    def test_hyperbolicity(self, skew):
        report = check_hyperbolicity(skew, 2000, seed=1)
        assert report.passed
        assert report.stable_max <= 0.5
        assert math.isclose(report.cone_max, 0.0, abs_tol=1e-15)

    def test_nonmarkov_extra_condition_reported(self):
        report = check_hyperbolicity(default_skew(nonmarkov_default()), 1000, seed=2)
        assert report.extra_max is not None
        assert report.extra_bound == 10.0

    def test_hyperbolicity_needs_samples(self, skew):
        with pytest.raises(DomainError):
            check_hyperbolicity(skew, 10, seed=0)
