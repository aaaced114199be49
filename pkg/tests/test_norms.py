import numpy as np
import pytest

from renewlab import norms
from renewlab.errors import DomainError
from renewlab.maps import build_return_partition, default_skew, nonmarkov_default
from renewlab.norms import LeafFunction, LeafTransfer
from tests.conftest import BETA

GX, GY = 33, 64


@pytest.fixture(scope="module")
def shallow(lsv_map):
    return build_return_partition(lsv_map, 500)


class TestLeafFunctions:
    def test_validation(self):
        with pytest.raises(DomainError):
            LeafFunction(np.ones((4, 16)))
        bad = np.ones((4, 64))
        bad[1, 3] = np.nan
        with pytest.raises(DomainError):
            LeafFunction(bad)

    def test_mass_and_leaf_integral(self):
        h = LeafFunction(np.ones((GX, GY)))
        assert h.mass() == pytest.approx(0.5)
        assert norms.leaf_integral(h, 3, np.ones(GY)) == pytest.approx(1.0)
        with pytest.raises(DomainError):
            norms.leaf_integral(h, 3, np.ones(10))


class TestNormEstimates:
    def test_constant_function(self):
        est = norms.estimate_norms(LeafFunction(np.ones((GX, GY))), q=0.5, basis_size=9)
        assert est.weak == pytest.approx(1.0)
        assert est.strong_stable == pytest.approx(1.0)
        assert est.unstable == pytest.approx(0.0, abs=1e-12)

    def test_linear_in_x(self):
        h = LeafFunction.from_function(lambda x, y: x, GX, GY)
        est = norms.estimate_norms(h, q=0.5, basis_size=9)
        assert est.weak == pytest.approx(1.0)
        assert est.unstable == pytest.approx(1.0, rel=1e-6)

    def test_weak_never_exceeds_strong_stable(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            est = norms.estimate_norms(LeafFunction(rng.standard_normal((GX, GY))), q=0.3, basis_size=13)
            assert est.weak <= est.strong_stable + 1e-15

    def test_basis_family_bounds(self):
        ys = np.linspace(0.0, 1.0, GY)
        family = norms.basis_family(10, 0.5, ys)
        assert family.names[:5] == ["one", "P1", "cos1", "sin1", "P2"]
        assert np.all(family.cq_norms <= family.c1_norms + 1e-12)
        with pytest.raises(DomainError):
            norms.basis_family(4, 0.5, ys)
        with pytest.raises(DomainError):
            norms.basis_family(10, 1.0, ys)


class TestTransfer2D:
    def test_positive_and_mass_preserving(self, skew, shallow):
        image = norms.transfer_2d(LeafFunction(np.ones((GX, GY))), skew, shallow)
        assert image.values.min() >= -1e-12
        covered = shallow.lebesgue_by_level()[1:].sum()
        assert image.mass() == pytest.approx(covered, rel=1e-2)

    def test_first_level_lands_in_upper_half(self, skew, shallow):
        image = norms.transfer_2d(LeafFunction(np.ones((GX, GY))), skew, shallow, only_level=1)
        ys = image.ys
        assert np.all(image.values[:, ys < 0.45] == 0.0)
        assert image.mass() == pytest.approx(0.25, rel=1e-2)

    def test_needs_markov_base(self, shallow):
        with pytest.raises(DomainError):
            LeafTransfer(default_skew(nonmarkov_default()), shallow, GX, GY)

    def test_grid_mismatch(self, skew, shallow):
        transfer = LeafTransfer(skew, shallow, GX, GY, levels=20)
        with pytest.raises(DomainError):
            transfer.apply(LeafFunction(np.ones((GX + 1, GY))))
        with pytest.raises(DomainError):
            transfer.apply(LeafFunction(np.ones((GX, GY))), only_level=21)


class TestAudits:
    def test_mixed_samples(self):
        samples = norms.mixed_samples(GX, GY, count=8, seed=1)
        assert [s.label for s in samples[:4]] == ["const-0", "smooth-1", "rough-2", "mixed-3"]
        rough = samples[2]
        np.testing.assert_array_equal(rough.values[0], np.sign(rough.ys - 0.5))

    def test_ly_audit_records(self, skew, shallow):
        samples = norms.mixed_samples(17, GY, count=4, seed=2)
        report = norms.ly_audit(skew, shallow, samples, [1, 2], q=0.5, basis_size=9)
        assert len(report.records) == 8
        assert report.fitted_c >= 0.0
        assert all(r.passed for r in report.records if r.calibration)
        assert report.basis_stability >= 0.0

    def test_slice_norm_decay(self, skew, lsv_map):
        partition = build_return_partition(lsv_map, 1000)
        report = norms.slice_norm_decay(skew, partition, GX, GY, window=(20, 1000), points=8, basis_size=9)
        assert report.expected_slope == pytest.approx(-(1.0 + BETA))
        assert report.slope == pytest.approx(report.expected_slope, abs=0.15)

    def test_distortion(self, lsv_map, shallow):
        report = norms.distortion_bounds(lsv_map, shallow, levels=(1, 2, 5, 10))
        assert report.levels == [1, 2, 5, 10]
        assert all(np.isfinite(report.bounds))
        assert report.passed
