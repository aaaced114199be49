from pathlib import Path

import numpy as np
import pytest

from renewlab.acceptance import Laboratory, Workbench, accept, enforce_gates, rates_series, run_determinism
from renewlab.config import RuntimeSettings
from renewlab.errors import ConfigError, GateFailure
from renewlab.renewal import operator_renewal_apply
from renewlab.schemas import ExperimentConfig, GateResult, MapConfig
from renewlab.storage import RunDirectory

QUICK = Path(__file__).resolve().parent.parent / "configs" / "quick.json"


@pytest.fixture(scope="module")
def bench():
    config = ExperimentConfig(grid_size=64, n_max=2000, exact_levels=200, tail_window=(20, 1000))
    return Workbench(MapConfig(), config, "main")


class TestRatesSeries:
    def test_fits_the_operator_series(self, bench):
        series = rates_series(bench, 1000)
        assert series.kind == "operator"
        assert series.values.shape == (1001, 64)
        direct = operator_renewal_apply(bench.operator(), np.full(64, 1.0 / 64), 1000)
        np.testing.assert_array_equal(series.paired(), direct.paired())

    def test_fit_record(self, bench):
        series = rates_series(bench, 1000)
        assert series.fit.q == 2
        assert len(series.fit.d_fit) == 3
        assert series.normalization["pairing"] > 0.0
        assert series.normalization["c_hat"] == bench.tail_model.c_hat

    def test_horizon_is_capped_by_truncation(self, bench):
        assert rates_series(bench, 50_000).horizon == 2000

    def test_nonmarkov_map_is_a_config_error(self):
        config = ExperimentConfig()
        with pytest.raises(ConfigError):
            rates_series(Workbench(config.nonmarkov_map, config, "nonmarkov"), 1000)


class TestEnforceGates:
    def test_all_passed(self):
        enforce_gates([GateResult(name="a", passed=True), GateResult(name="b", passed=True)])

    def test_names_first_failure(self):
        gates = [
            GateResult(name="a", passed=True),
            GateResult(name="b", passed=False),
            GateResult(name="c", passed=False),
        ]
        with pytest.raises(GateFailure) as info:
            enforce_gates(gates)
        assert info.value.gate == "b"
        assert "2 of 3" in info.value.detail
        assert info.value.exit_code == 1


@pytest.mark.slow
class TestAcceptance:
    def _lab(self, tmp_path, checks):
        config = ExperimentConfig.load(QUICK).with_overrides(checks=checks)
        return Laboratory(config, RuntimeSettings(), RunDirectory(tmp_path / "run"))

    def test_determinism_cell(self, tmp_path):
        (gate,) = run_determinism(self._lab(tmp_path, ["tails", "renewal"]))
        assert gate.name == "determinism"
        assert gate.passed, gate.detail
        assert (tmp_path / "run-rerun" / "scalar_series.csv").exists()

    def test_accept_runs_cells_then_determinism(self, tmp_path):
        gates = accept(self._lab(tmp_path, ["tails", "renewal", "determinism"]))
        names = [g.name for g in gates]
        assert names[-1] == "determinism"
        assert "tail beta_hat" in names
        assert "cesaro" in " ".join(names)
