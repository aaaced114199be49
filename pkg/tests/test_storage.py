import json

import numpy as np
import pytest

from renewlab.config import RuntimeSettings
from renewlab.errors import ConfigError
from renewlab.maps import build_return_partition, nonmarkov_default
from renewlab.schemas import ExperimentConfig, TailModel
from renewlab.storage import (
    RunDirectory,
    export_correlation_csv,
    export_operator_triplets,
    export_partition_csv,
    export_series_csv,
    export_tail_csv,
)
from renewlab.tails import cell_masses


class TestRunDirectory:
    def test_csv_cells(self, tmp_path):
        run = RunDirectory(tmp_path / "run")
        path = run.write_csv("t.csv", ["a", "b", "c"], [(1, 0.1, True), (np.int64(2), np.float64(1 / 3), False)])
        lines = path.read_text().splitlines()
        assert lines[0] == "a,b,c"
        assert lines[1] == "1,0.10000000000000001,true"
        assert lines[2] == "2,0.33333333333333331,false"

    def test_manifest_and_summary(self, tmp_path):
        run = RunDirectory(tmp_path)
        config = ExperimentConfig(seed=12)
        run.write_manifest(config, RuntimeSettings(threads=3), extra={"command": "tails"})
        manifest = json.loads(run.file("manifest.json").read_text())
        assert manifest["seed"] == 12
        assert manifest["threads"] == 3
        assert manifest["command"] == "tails"
        assert manifest["config"]["seed"] == 12
        run.write_summary(["a: PASS", "b: FAIL"])
        assert run.file("summary.txt").read_text() == "a: PASS\nb: FAIL\n"

    def test_unwritable_root_is_a_config_error(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory")
        with pytest.raises(ConfigError):
            RunDirectory(blocker / "run")


class TestExporters:
    def test_partition_and_tail(self, tmp_path, partition, stationary):
        run = RunDirectory(tmp_path)
        weighted = cell_masses(partition, stationary)
        export_partition_csv(run, weighted)
        rows = run.file("partition.csv").read_text().splitlines()
        assert rows[0] == "n,lo,hi,lebesgue_length,mass"
        assert len(rows) == 1 + weighted.cell_n.size
        mass = np.array([float(r.split(",")[4]) for r in rows[1:]])
        np.testing.assert_allclose(mass.sum(), weighted.masses.sum(), rtol=1e-12)
        model = TailModel(
            beta_hat=0.75, beta_stderr=0.0, c_hat=0.4, ell_n=[1], ell_profile=[0.4],
            residual_exponent=-1.0, residual_stderr=0.0, fit_window=(100, 1000),
        )
        export_tail_csv(run, weighted, model)
        assert len(run.file("tail.csv").read_text().splitlines()) == 1 + weighted.n_max

    def test_operator_triplets(self, tmp_path, operator):
        run = RunDirectory(tmp_path)
        path = export_operator_triplets(run, operator)
        assert len(path.read_text().splitlines()) == 1 + operator.matrix.nnz
        assert export_operator_triplets(run, operator, name="skip.csv", max_entries=1) is None
        assert not run.file("skip.csv").exists()

    def test_series_and_correlations(self, tmp_path):
        run = RunDirectory(tmp_path)
        export_series_csv(run, "s.csv", np.array([1.0, 0.5]))
        assert run.file("s.csv").read_text().splitlines()[1] == "0,1,nan,nan"
        lags = np.array([1, 2])
        export_correlation_csv(run, "c.csv", lags, np.ones(2), np.zeros(2), np.ones(2), np.ones(2))
        assert run.file("c.csv").read_text().splitlines()[0] == "n,estimate,se,asymptote,normalized"

    def test_bytes_are_reproducible(self, tmp_path, partition, stationary):
        weighted = cell_masses(partition, stationary)
        first = export_partition_csv(RunDirectory(tmp_path / "a"), weighted).read_bytes()
        second = export_partition_csv(RunDirectory(tmp_path / "b"), weighted).read_bytes()
        assert first == second

    def test_partition_mass_is_per_cell_for_nonmarkov(self, tmp_path):
        partition = build_return_partition(nonmarkov_default(), 500)
        weighted = cell_masses(partition, np.full(64, 1.0 / 64))
        path = export_partition_csv(RunDirectory(tmp_path), weighted)
        rows = [r.split(",") for r in path.read_text().splitlines()[1:]]
        n = np.array([int(r[0]) for r in rows])
        length = np.array([float(r[3]) for r in rows])
        mass = np.array([float(r[4]) for r in rows])
        # uniform density: every cell carries mass proportional to its length
        np.testing.assert_allclose(mass / length, mass[0] / length[0], rtol=1e-9)
        np.testing.assert_allclose(np.bincount(n, weights=mass, minlength=501), weighted.masses, atol=1e-15)
        shared = np.bincount(n) > 1
        assert shared.any()
