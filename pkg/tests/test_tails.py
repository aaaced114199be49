import math

import numpy as np
import pytest

from renewlab.errors import DomainError, NegativeMassError
from renewlab.maps import ReturnPartition
from renewlab.tails import (
    cell_masses,
    expansion_order,
    fit_tail,
    mean_return_time,
    renewal_constant,
    truncation_sensitivity,
)
from tests.conftest import BETA, synthetic_masses


class TestRenewalConstants:
    def test_closed_form(self):
        assert renewal_constant(0.5) == pytest.approx(1.0 / math.pi)
        assert renewal_constant(BETA) == pytest.approx(math.sin(math.pi * BETA) / math.pi)

    def test_domain(self):
        with pytest.raises(DomainError):
            renewal_constant(1.2)

    @pytest.mark.parametrize("beta", [0.1, 0.25, 0.4, 0.6, 0.75, 0.9])
    def test_symmetric_in_beta(self, beta):
        assert renewal_constant(beta) == pytest.approx(renewal_constant(1.0 - beta), rel=1e-12)

    @pytest.mark.parametrize(
        "beta, q", [(0.75, 2), (0.6, 1), (0.4, 0), (0.5, 0), (2.0 / 3.0, 1), (0.8, 3), (0.9, 8)]
    )
    def test_expansion_order(self, beta, q):
        assert expansion_order(beta) == q


class TestMeanReturnTime:
    def test_plain(self):
        assert mean_return_time(ReturnPartition.from_masses([0.0, 0.5, 0.5])) == pytest.approx(1.5)

    def test_truncated_mass_counts_at_overflow(self):
        part = ReturnPartition.from_masses([0.0, 0.5, 0.25], truncated_mass=0.25)
        assert mean_return_time(part) == pytest.approx(0.5 + 0.5 + 3 * 0.25)

    def test_from_masses_validation(self):
        with pytest.raises(DomainError):
            ReturnPartition.from_masses([0.1, 0.9])


class TestCellMasses:
    def test_uniform_density_gives_lebesgue_fractions(self, partition):
        weighted = cell_masses(partition, np.full(64, 1.0 / 64))
        assert weighted.masses[1] == pytest.approx(0.5, abs=1e-12)
        assert weighted.masses.sum() + weighted.truncated_mass == pytest.approx(1.0, abs=1e-12)
        assert weighted.tails()[0] == pytest.approx(1.0, abs=1e-12)
        assert weighted.tails()[1] == pytest.approx(0.5, abs=1e-12)

    def test_negative_density_raises(self, partition):
        density = np.ones(8)
        density[-1] = -5.0
        with pytest.raises(NegativeMassError):
            cell_masses(partition, density)

    def test_tails_are_monotone(self, partition, stationary):
        tails = cell_masses(partition, stationary).tails()
        assert np.all(np.diff(tails) <= 1e-15)


class TestTailFit:
    def test_recovers_synthetic_law(self):
        horizon = 20_000
        p = synthetic_masses(BETA, horizon)
        part = ReturnPartition.from_masses(p, truncated_mass=(horizon + 1) ** -BETA)
        model = fit_tail(part, (100, 10_000))
        assert model.beta_hat == pytest.approx(BETA, abs=0.01)
        assert model.c_hat == pytest.approx(1.0, rel=0.02)
        assert model.fit_window == (100, 10_000)

    def test_lsv_tail_index(self, partition, stationary):
        model = fit_tail(cell_masses(partition, stationary), (100, 2000))
        assert model.beta_hat == pytest.approx(BETA, abs=0.05)

    def test_window_validation(self, partition):
        with pytest.raises(DomainError):
            fit_tail(partition, (100, 500))
        with pytest.raises(DomainError):
            fit_tail(partition, (10, 5000))

    def test_truncation_is_invisible_inside_window(self, lsv_map, stationary):
        report = truncation_sensitivity(lsv_map, 2000, stationary, window=(10, 1000))
        assert report.n_half == 1000
        assert abs(report.beta_full - report.beta_half) < 1e-6
