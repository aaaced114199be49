import json
from pathlib import Path

import pytest

from renewlab.errors import ConfigError
from renewlab.schemas import CHECK_NAMES, ExperimentConfig, FiberConfig, GateResult, MapConfig

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


class TestExperimentConfig:
    def test_defaults(self):
        config = ExperimentConfig()
        assert config.beta == pytest.approx(0.75)
        assert config.finite_map.alpha == 0.5
        assert config.nonmarkov_map.kind == "nonmarkov"
        assert tuple(config.checks) == CHECK_NAMES

    def test_canonical_round_trip(self):
        config = ExperimentConfig(seed=3, lags=[5, 1, 5])
        again = ExperimentConfig.parse(config.dump_canonical())
        assert again.model_dump() == config.model_dump()
        assert again.dump_canonical() == config.dump_canonical()

    def test_canonical_json_is_sorted(self):
        data = json.loads(ExperimentConfig().dump_canonical())
        assert list(data) == sorted(data)
        assert "beta" not in data and "beta" not in data["map"]

    @pytest.mark.parametrize(
        "text",
        [
            "{not json",
            '{"grid_size": 1}',
            '{"unknown_field": 1}',
            '{"tail_window": [100, 200]}',
            '{"checks": ["tails", "bogus"]}',
            '{"map": {"kind": "custom", "branches": ["0.5 1.0 2.0"]}}',
        ],
    )
    def test_invalid_documents(self, text):
        with pytest.raises(ConfigError):
            ExperimentConfig.parse(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.load(tmp_path / "absent.json")

    def test_overrides(self, tmp_path):
        config = ExperimentConfig().with_overrides(seed=99, threads=None, output_dir=tmp_path)
        assert config.seed == 99
        assert config.threads is None
        assert config.output_dir == tmp_path
        with pytest.raises(ConfigError):
            ExperimentConfig().with_overrides(gate_slack=-1.0)

    def test_lag_grid(self):
        config = ExperimentConfig(lag_min=50, lag_max=800, lags_per_decade=24)
        grid = config.lag_grid()
        assert grid[0] == 50 and grid[-1] == 800
        assert grid == sorted(set(grid))
        assert ExperimentConfig(lags=[7, 3, 3]).lag_grid() == [3, 7]

    @pytest.mark.parametrize("name", ["default.json", "quick.json"])
    def test_shipped_configs_load(self, name):
        config = ExperimentConfig.load(CONFIGS / name)
        assert config.map.alpha == pytest.approx(4.0 / 3.0)


class TestSmallModels:
    def test_fiber_contraction(self):
        assert FiberConfig().c == 0.5
        assert FiberConfig(kind="affine", contraction=0.3).c == 0.3

    def test_map_beta(self):
        assert MapConfig(alpha=2.0).beta == 0.5

    def test_gate_line(self):
        gate = GateResult(name="tail beta_hat", passed=True, value=0.751, tolerance=0.02)
        line = gate.line()
        assert line.startswith("tail beta_hat: PASS")
        assert "tol=" in line
        assert GateResult(name="x", passed=False).line().startswith("x: FAIL")
