import math

import numpy as np
import pytest

from renewlab.errors import DomainError
from renewlab.maps import build_return_partition
from renewlab.renewal import rank_one_operator
from renewlab.tails import cell_masses, fit_tail
from renewlab.transfer import (
    Grid,
    build_induced_operator,
    eigenvalue_asymptotics,
    lambda_sweep,
    leading_eigen,
    occupation_histogram,
    perturbed_operator,
    refinement_check,
    slice_mass_decay,
    spectral_projection_check,
    split_by_return_time,
)
from tests.conftest import BETA


class TestGrid:
    def test_cells_are_left_open(self):
        grid = Grid(4)
        assert list(grid.locate(np.array([0.5 + 1e-9, 0.625, 0.63, 1.0]))) == [0, 0, 1, 3]
        assert grid.width == pytest.approx(0.125)

    def test_minimum_size(self):
        with pytest.raises(DomainError):
            Grid(1)


class TestUlamOperator:
    def test_column_stochastic(self, operator):
        assert operator.column_sum_error < 1e-10
        assert operator.matrix.min() >= 0.0

    def test_slices_reassemble_operator(self, operator):
        assert operator.slices.identity_error <= 1e-12
        sums = np.asarray(perturbed_operator(operator, 0.9).sum(axis=0)).ravel()
        assert np.all(sums <= 0.9 + 1e-12)
        assert np.all(sums > 0.0)

    def test_blocked_deep_levels_keep_mass(self, lsv_map, partition):
        op = split_by_return_time(
            build_induced_operator(lsv_map, partition, Grid(32), exact_levels=50), partition
        )
        assert op.column_sum_error < 1e-10
        assert op.slices.identity_error <= 1e-10

    def test_blocked_slices_stay_close_to_exact(self, lsv_map, partition, operator):
        blocked = split_by_return_time(
            build_induced_operator(lsv_map, partition, Grid(64), exact_levels=50), partition
        )
        diff = total = 0.0
        for n in range(51, partition.n_max + 1):
            approx = blocked.slices.slice(n).toarray()
            exact = operator.slices.slice(n).toarray()
            # per-column masses are stored exactly; only the target profile is shared
            np.testing.assert_allclose(approx.sum(axis=0), exact.sum(axis=0), rtol=1e-9, atol=1e-15)
            diff += np.abs(approx - exact).sum()
            total += exact.sum()
        assert diff / total < 0.05
        np.testing.assert_allclose(
            blocked.slices.slice(10).toarray(), operator.slices.slice(10).toarray(), atol=1e-15
        )

    def test_mismatched_partition(self, operator, lsv_map):
        with pytest.raises(DomainError):
            split_by_return_time(operator, build_return_partition(lsv_map, 100))

    def test_perturbation_domain(self, operator):
        with pytest.raises(DomainError):
            perturbed_operator(operator, 1.1)


class TestSpectrum:
    def test_stationary_vector(self, operator):
        sd = leading_eigen(operator.matrix)
        assert np.real(sd.lam) == pytest.approx(1.0, abs=1e-9)
        assert np.real(sd.right).sum() == pytest.approx(1.0)
        assert np.real(sd.right).min() > -1e-12
        assert 0.0 <= sd.gap < 1.0
        assert sd.projection.idempotency_error() < 1e-9

    def test_projection_check(self, operator):
        report = spectral_projection_check(operator, leading_eigen(operator.matrix), trials=2, iterations=60)
        assert report.fixed_point_error <= 1e-10
        assert report.worst_holdout_ratio <= 2.0
        assert report.passed

    def test_stationary_matches_orbit_histogram(self, lsv_map, stationary):
        hist = occupation_histogram(lsv_map, Grid(64), orbits=4000, steps=400, seed=3)
        assert np.abs(hist - stationary).sum() < 0.15

    def test_rank_one_eigenvalue(self):
        p = np.array([0.0, 0.5, 0.3, 0.2])
        op = rank_one_operator(p, np.array([1.0, 2.0, 3.0]))
        sd = leading_eigen(op.matrix)
        np.testing.assert_allclose(np.real(sd.right), [1 / 6, 2 / 6, 3 / 6], atol=1e-10)
        u = 0.1
        (summary,) = lambda_sweep(op, [u])
        expected = sum(p[n] * math.exp(-n * u) for n in range(1, 4))
        assert summary.lambda_real == pytest.approx(expected, abs=1e-10)
        assert summary.z_real == pytest.approx(math.exp(-u))


class TestSliceDecay:
    def test_lebesgue_mass_slope(self, operator):
        report = slice_mass_decay(operator, window=(50, 2000))
        assert report.slope == pytest.approx(-(1.0 + BETA), abs=0.1)
        assert report.identity_error <= 1e-12

    def test_level_masses_match_partition(self, operator, partition):
        levels = partition.lebesgue_by_level()
        np.testing.assert_allclose(operator.ledger.level_mass[1:51], levels[1:51], rtol=1e-6)


class TestEigenvalueAsymptotics:
    def test_gap_grows_like_u_to_beta(self, operator, partition, stationary):
        c_hat = fit_tail(cell_masses(partition, stationary), (20, 2000)).c_hat
        us = np.geomspace(1e-2, 1e-1, 5)
        report = eigenvalue_asymptotics(operator, us, BETA, c_hat, reference_u=1e-2)
        gaps = np.asarray(report.one_minus_lambda)
        assert np.all(gaps > 0.0)
        assert np.all(np.diff(gaps) > 0.0)
        assert 0.55 < report.slope < 0.95
        assert report.reference_u == pytest.approx(1e-2)
        assert math.isfinite(report.prefactor_error)

    def test_grid_refinement_is_stable(self, lsv_map, partition):
        report = refinement_check(lsv_map, partition, 32, u=1e-2, tolerance=0.02)
        assert (report.m_coarse, report.m_fine) == (32, 64)
        assert 0.0 < report.lambda_fine < 1.0
        assert report.passed
