import numpy as np
import pytest

from renewlab.correlate import (
    CorrelationSeries,
    Observable,
    bump_observable,
    correlation_mc,
    correlation_series,
    fiber_contraction_check,
    finite_decay_check,
    indicator_y,
    mixing_rate_check,
    quadrature_integral,
    quotient_cross_check,
    quotient_prediction,
    sample_induced,
)
from renewlab.errors import DomainError, SupportError
from renewlab.maps import ReturnPartition
from renewlab.tails import mean_return_time, renewal_constant
from tests.conftest import synthetic_masses

UNIFORM = np.full(64, 1.0 / 64)


class TestObservables:
    def test_bump_shape(self):
        v = bump_observable((0.6, 0.9))
        x = np.array([0.55, 0.6, 0.75, 0.95])
        values = v(x, np.zeros(4))
        assert values[0] == 0.0 and values[1] == 0.0 and values[3] == 0.0
        assert values[2] == pytest.approx(1.0)
        assert v.y_independent

    def test_product_bump_depends_on_y(self):
        v = bump_observable((0.6, 0.9), (0.2, 0.8))
        assert not v.y_independent
        assert v(np.array([0.75]), np.array([0.1]))[0] == 0.0
        assert v(np.array([0.75]), np.array([0.5]))[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("support", [(0.4, 0.9), (0.8, 0.7)])
    def test_support_must_lie_in_y(self, support):
        with pytest.raises(DomainError):
            bump_observable(support)


class TestSampling:
    def test_points_lie_in_y(self):
        x, y = sample_induced(20_000, seed=5, stationary=UNIFORM)
        assert np.all((x > 0.5) & (x <= 1.0))
        assert np.all((y >= 0.0) & (y < 1.0))
        assert x.mean() == pytest.approx(0.75, abs=0.01)

    def test_streams_are_reproducible(self):
        a = sample_induced(100, seed=9, stationary=UNIFORM, block_index=3)
        b = sample_induced(100, seed=9, stationary=UNIFORM, block_index=3)
        c = sample_induced(100, seed=9, stationary=UNIFORM, block_index=4)
        np.testing.assert_array_equal(a[0], b[0])
        assert not np.array_equal(a[0], c[0])

    def test_quadrature_of_indicator(self):
        assert quadrature_integral(indicator_y(), UNIFORM) == pytest.approx(1.0)


class TestCorrelationSeries:
    def test_thread_layout_does_not_change_bytes(self, skew):
        v = bump_observable((0.55, 0.95), (0.2, 0.8))
        w = bump_observable((0.6, 0.9))
        runs = [
            correlation_series(skew, v, w, [0, 1, 5], 5000, 17, UNIFORM, block_size=1024, threads=t)
            for t in (1, 3)
        ]
        assert runs[0].estimates.tobytes() == runs[1].estimates.tobytes()
        assert runs[0].std_errors.tobytes() == runs[1].std_errors.tobytes()
        assert runs[0].sample_count == 5000

    def test_lag_zero_matches_quadrature(self, skew):
        v = bump_observable((0.6, 0.9))
        square = Observable("v2", lambda x, y: v(x, y) ** 2, v.x_support, v.q, True)
        est, se = correlation_mc(skew, v, v, 0, 40_000, 21, UNIFORM, block_size=8192)
        assert abs(est - quadrature_integral(square, UNIFORM)) < 4.0 * se

    def test_support_error(self, skew):
        everywhere = Observable("one", lambda x, y: np.ones_like(np.asarray(x) * np.asarray(y)))
        with pytest.raises(SupportError):
            correlation_series(skew, indicator_y(), everywhere, [1, 2], 2000, 1, UNIFORM, block_size=1024)

    def test_lag_validation(self, skew):
        with pytest.raises(DomainError):
            correlation_series(skew, indicator_y(), indicator_y(), [-1], 100, 1, UNIFORM)


class TestQuotientPrediction:
    def test_needs_y_independent_target(self, operator, stationary):
        v = bump_observable((0.6, 0.9))
        w = bump_observable((0.6, 0.9), (0.2, 0.8))
        with pytest.raises(DomainError):
            quotient_prediction(operator, v, w, stationary, [1, 2])

    def test_agrees_with_monte_carlo(self, skew, operator, stationary):
        v = bump_observable((0.55, 0.95), (0.2, 0.8))
        w = bump_observable((0.6, 0.9))
        series = correlation_series(skew, v, w, [1, 3, 10], 100_000, 4, stationary, block_size=2**15)
        prediction = quotient_prediction(operator, v, w, stationary, series.lags)
        report = quotient_cross_check(series, prediction, threshold=5.0, allowance=0.1)
        assert report.passed

    def test_exact_prediction_has_zero_score(self):
        series = CorrelationSeries(
            lags=np.array([1, 2]),
            estimates=np.array([0.3, 0.2]),
            std_errors=np.array([0.01, 0.01]),
            sample_count=100,
            seed=0,
            block_size=100,
            observables=("v", "w"),
        )
        report = quotient_cross_check(series, np.array([0.3, 0.2]))
        assert report.max_z == 0.0 and report.passed


class TestRateChecks:
    def _series(self, values, se, lags=None):
        lags = np.arange(50, 850, 50) if lags is None else lags
        return CorrelationSeries(
            lags=lags,
            estimates=values(lags.astype(float)),
            std_errors=np.full(lags.size, se),
            sample_count=10**7,
            seed=0,
            block_size=2**18,
            observables=("v", "w"),
        )

    def test_exact_first_order_law(self):
        beta, c_hat, iv, iw = 0.75, 0.4, 0.3, 0.2
        target = renewal_constant(beta) * iv * iw
        series = self._series(lambda n: target * n ** (beta - 1.0) / c_hat, 1e-6)
        report = mixing_rate_check(series, beta, iv, iw, c_hat)
        assert not report.inconclusive
        assert report.d0_rel_error < 1e-6
        assert report.passed

    def test_noise_only_is_inconclusive(self):
        series = self._series(lambda n: np.zeros_like(n), 1e-3)
        report = mixing_rate_check(series, 0.75, 0.3, 0.2, 0.4)
        assert report.inconclusive
        assert not report.passed

    def test_zero_target_accepts_vanishing_leading_term(self):
        series = self._series(lambda n: 0.05 * n**-0.5, 1e-6)
        report = mixing_rate_check(series, 0.75, 0.0, 0.2, 0.4)
        assert report.target == 0.0
        assert report.d0_rel_error is None
        assert report.consistent_with_zero
        assert report.passed

    def test_zero_target_rejects_leading_term(self):
        series = self._series(lambda n: 0.05 * n**-0.25, 1e-6)
        report = mixing_rate_check(series, 0.75, 0.0, 0.2, 0.4)
        assert report.d0_rel_error is None
        assert report.consistent_with_zero is False
        assert not report.passed

    def test_finite_measure_decay(self):
        part = ReturnPartition.from_masses(synthetic_masses(2.0, 20_000), truncated_mass=20_001**-2.0)
        mu_y = 1.0 / mean_return_time(part)
        iv = iw = 0.5
        limit = (mu_y * iv) * (mu_y * iw)
        tails = mu_y * part.tails()
        beyond = np.concatenate([np.cumsum(tails[::-1])[::-1][1:], [0.0]])
        lags = np.arange(20, 520, 20)
        series = self._series(lambda n: limit * (1.0 + beyond[n.astype(int)]) / mu_y, 1e-9, lags=lags)
        report = finite_decay_check(series, iv, iw, 2.0, part)
        assert not report.inconclusive
        assert report.mu_y == pytest.approx(mu_y)
        assert report.slope == pytest.approx(-1.0, abs=0.15)
        assert report.c0_fit / report.c0_tail == pytest.approx(1.0, abs=1e-6)
        assert report.passed

    def test_finite_decay_needs_finite_mean(self):
        part = ReturnPartition.from_masses(synthetic_masses(0.75, 1000))
        series = self._series(lambda n: np.ones_like(n), 1e-3)
        with pytest.raises(DomainError):
            finite_decay_check(series, 0.5, 0.5, 0.75, part)

    def test_fiber_contraction(self, skew):
        assert fiber_contraction_check(skew, 2000, 32, seed=8).passed
