import numpy as np
import pytest

from renewlab.errors import DegenerateObservableError, DomainError
from renewlab.maps import ReturnPartition, build_return_partition
from renewlab.renewal import (
    RenewalSeries,
    cesaro_check,
    finite_renewal_check,
    first_order_check,
    higher_order_fit,
    operator_renewal_apply,
    rank_one_operator,
    scalar_renewal,
)
from renewlab.tails import cell_masses, renewal_constant
from renewlab.transfer import DiscretizedOperator, Grid, leading_eigen, split_by_return_time
from tests.conftest import synthetic_masses


@pytest.fixture(scope="module")
def synthetic_series():
    return scalar_renewal(synthetic_masses(0.6, 20_000), 20_000)


class TestScalarRenewal:
    def test_geometric_law_is_constant(self):
        p = 0.5 ** np.arange(60)
        u = scalar_renewal(p, 50).values
        assert u[0] == 1.0
        np.testing.assert_allclose(u[1:], 0.5, atol=1e-12)

    def test_short_recursion(self):
        u = scalar_renewal([0.0, 0.5, 0.5], 3).values
        np.testing.assert_allclose(u, [1.0, 0.5, 0.75, 0.625])

    def test_zero_index_is_ignored(self):
        a = scalar_renewal([0.3, 0.5, 0.5], 5).values
        b = scalar_renewal([0.0, 0.5, 0.5], 5).values
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("p", [[0.0, -0.1, 0.5], [0.0, 0.7, 0.7]])
    def test_invalid_masses(self, p):
        with pytest.raises(DomainError):
            scalar_renewal(p, 4)

    def test_synthetic_first_order(self, synthetic_series):
        n = synthetic_series.horizon
        value = n**0.4 * synthetic_series.values[n]
        assert value == pytest.approx(renewal_constant(0.6), rel=0.10)


class TestOperatorRenewal:
    def test_explicit_slices(self):
        r1 = np.array([[0.2, 0.1], [0.1, 0.3]])
        r2 = np.array([[0.3, 0.2], [0.1, 0.2]])
        op = DiscretizedOperator.from_slices(Grid(2), [r1, r2])
        op = split_by_return_time(op, ReturnPartition.from_masses([0.0, 0.5, 0.5]))
        v = np.array([1.0, 2.0])
        t = operator_renewal_apply(op, v, 2).values
        np.testing.assert_allclose(t[1], r1 @ v)
        np.testing.assert_allclose(t[2], r1 @ (r1 @ v) + r2 @ v)

    def test_rank_one_matches_scalar(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            p = rng.random(41)
            p[0] = 0.0
            p *= 0.95 / p[1:].sum()
            v = rng.random(16)
            op = rank_one_operator(p, rng.random(16) + 0.1)
            paired = operator_renewal_apply(op, v, 40).paired()
            np.testing.assert_allclose(paired, scalar_renewal(p, 40).values * v.sum(), atol=1e-12)

    def test_horizon_and_shape_checks(self, operator):
        with pytest.raises(DomainError):
            operator_renewal_apply(operator, np.ones(64), operator.n_max + 1)
        with pytest.raises(DomainError):
            operator_renewal_apply(operator, np.ones(3), 5)

    def test_lsv_operator_series_is_positive(self, operator):
        v = np.full(64, 1.0 / 64)
        series = operator_renewal_apply(operator, v, 200)
        assert series.values.shape == (201, 64)
        paired = series.paired()
        assert np.all(paired[1:] > 0)
        assert paired[200] < paired[1]


class TestAsymptoticChecks:
    def test_first_order_on_rank_one(self):
        horizon = 3000
        p = synthetic_masses(0.6, horizon)
        op = rank_one_operator(p, np.array([1.0, 1.0, 2.0]))
        sd = leading_eigen(op.matrix)
        v = np.array([0.2, 0.3, 0.5])
        w = np.ones(3)
        series = operator_renewal_apply(op, v, horizon)
        report = first_order_check(series, sd.projection, v, w, 0.6, 1.0, tolerance=0.25)
        assert report.target == pytest.approx(renewal_constant(0.6))
        assert report.last_rel_error < 0.25

    def test_degenerate_pairing(self):
        op = rank_one_operator(np.array([0.0, 0.5, 0.5]), np.ones(3))
        sd = leading_eigen(op.matrix)
        v = np.array([1.0, -1.0, 0.0])
        series = operator_renewal_apply(op, v, 2)
        with pytest.raises(DegenerateObservableError):
            first_order_check(series, sd.projection, v, np.ones(3), 0.6, 1.0, window=(1, 2))

    def test_higher_order_recovers_d0(self, synthetic_series):
        fitted = higher_order_fit(synthetic_series, 0.6)
        assert fitted.fit.q == 1
        assert fitted.fit.d0_rel_error < 0.05
        assert len(fitted.d_fit) == 2

    def test_cesaro_growth(self, synthetic_series):
        report = cesaro_check(synthetic_series, 0.6)
        assert report.expected_slope == 0.6
        assert report.slope == pytest.approx(0.6, abs=0.05)
        assert report.prefactor_ratio is not None

    def test_finite_mean_correction(self):
        n_max = 20_000
        p = synthetic_masses(2.0, n_max)
        part = ReturnPartition.from_masses(p, truncated_mass=(n_max + 1) ** -2.0)
        series = scalar_renewal(part.renewal_masses(), n_max // 100)
        report = finite_renewal_check(series, part)
        assert report.window == (20, 200)
        assert report.last_ratio == pytest.approx(1.0, abs=0.15)

    def test_synthetic_constructor(self):
        series = RenewalSeries.synthetic([1.0, 0.5, 0.25], beta=0.5)
        assert series.kind == "synthetic"
        assert series.horizon == 2

    def test_finite_mean_partial_sums_grow_linearly(self):
        p = synthetic_masses(2.0, 20_000)
        mean = float(np.dot(np.arange(p.size), p))
        series = scalar_renewal(p, 20_000)
        report = cesaro_check(series, 2.0, mean_return=mean, slope_tolerance=0.01)
        assert report.expected_slope == 1.0
        assert report.slope == pytest.approx(1.0, abs=0.01)
        assert report.prefactor_ratio == pytest.approx(1.0, abs=0.05)
        assert report.passed


class TestTruncation:
    def test_early_terms_ignore_deeper_partition(self, lsv_map, stationary):
        short = cell_masses(build_return_partition(lsv_map, 500), stationary)
        deep = cell_masses(build_return_partition(lsv_map, 1000), stationary)
        u_short = scalar_renewal(short.renewal_masses(), 500).values
        u_deep = scalar_renewal(deep.renewal_masses(), 500).values
        np.testing.assert_allclose(u_short, u_deep, rtol=1e-10, atol=1e-12)
