"""
Run Directory Storage for renewlab

Every subcommand writes into one run directory: a JSON manifest (the only file
carrying a timestamp), plot-ready CSV series and a plain-text summary. CSV files
are comma separated with a header row and '.' decimals; floats are written with
17 significant digits so the bytes depend on the computed values only.
"""

import csv
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np

from renewlab import __version__
from renewlab.config import RuntimeSettings
from renewlab.errors import ConfigError
from renewlab.maps import ReturnPartition
from renewlab.schemas import ExperimentConfig, LYAuditReport, TailModel
from renewlab.transfer import DiscretizedOperator

logger = logging.getLogger(__name__)


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


# ============================================================================
# Run Directory
# ============================================================================


class RunDirectory:
    """
    One output directory per run.

    Attributes:
        path: Directory holding manifest.json, CSV files and summary.txt
    """

    def __init__(self, path: Path):
        self.path = Path(path)
        try:
            self.path.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create run directory {self.path}: {exc}") from exc

    def file(self, name: str) -> Path:
        return self.path / name

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        """
        Write a CSV file with a header row.

        Args:
            name: File name inside the run directory
            header: Column names
            rows: Row values; floats are written with 17 significant digits

        Returns:
            Path: The written file
        """
        target = self.file(name)
        with target.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            count = 0
            for row in rows:
                writer.writerow([_cell(v) for v in row])
                count += 1
        logger.debug("Wrote %s (%d rows)", target, count)
        return target

    def write_manifest(
        self,
        config: ExperimentConfig,
        settings: RuntimeSettings,
        extra: Optional[Dict[str, Any]] = None,
    ) -> Path:
        """
        Write manifest.json with provenance: config, thread layout, seed and version.

        Returns:
            Path: The manifest file
        """
        threads = config.threads or settings.threads
        manifest = {
            "created": datetime.now(timezone.utc).isoformat(),
            "version": __version__,
            "threads": threads,
            "block_size": settings.block_size,
            "seed": config.seed,
            "beta": config.beta,
            "config": json.loads(config.dump_canonical()),
        }
        manifest.update(extra or {})
        target = self.file("manifest.json")
        target.write_text(json.dumps(manifest, sort_keys=True, indent=2, default=str) + "\n", encoding="utf-8")
        return target

    def write_summary(self, lines: Sequence[str]) -> Path:
        target = self.file("summary.txt")
        target.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
        return target


# ============================================================================
# Exporters
# ============================================================================


def export_partition_csv(run: RunDirectory, partition: ReturnPartition, name: str = "partition.csv") -> Path:
    """Columns: n, lo, hi, lebesgue_length, mass (mu of the cell; nan before masses are filled)."""
    mass = partition.cell_mass if partition.cell_mass is not None else np.full(partition.cell_n.size, np.nan)
    rows = zip(partition.cell_n, partition.cell_lo, partition.cell_hi, partition.lengths, mass)
    return run.write_csv(name, ["n", "lo", "hi", "lebesgue_length", "mass"], rows)


def export_tail_csv(
    run: RunDirectory, partition: ReturnPartition, model: TailModel, name: str = "tail.csv"
) -> Path:
    """Columns: n, tail, fitted, residual on every n in 1..n_max."""
    tails = partition.tails()
    ns = np.arange(1, partition.n_max + 1)
    fitted = model.c_hat * ns.astype(float) ** (-model.beta_hat)
    rows = zip(ns, tails[ns], fitted, tails[ns] - fitted)
    return run.write_csv(name, ["n", "tail", "fitted", "residual"], rows)


def export_operator_triplets(
    run: RunDirectory, op: DiscretizedOperator, name: str = "operator.csv", max_entries: int = 2_000_000
) -> Optional[Path]:
    """Nonzero entries of the Ulam matrix as (row, col, value), column-major; skipped above max_entries."""
    if op.matrix.nnz > max_entries:
        logger.warning("Operator has %d entries; triplet export skipped", op.matrix.nnz)
        return None
    coo = op.matrix.tocsc().tocoo()
    return run.write_csv(name, ["row", "col", "value"], zip(coo.row, coo.col, coo.data))


def export_series_csv(
    run: RunDirectory, name: str, values: np.ndarray, asymptote: Optional[np.ndarray] = None
) -> Path:
    """Columns: n, value, asymptote, residual; the asymptote defaults to nan."""
    values = np.asarray(values, dtype=float)
    ns = np.arange(values.size)
    asym = np.full(values.size, np.nan) if asymptote is None else np.asarray(asymptote, dtype=float)
    return run.write_csv(name, ["n", "value", "asymptote", "residual"], zip(ns, values, asym, values - asym))


def export_correlation_csv(
    run: RunDirectory,
    name: str,
    lags: np.ndarray,
    estimates: np.ndarray,
    std_errors: np.ndarray,
    asymptote: np.ndarray,
    normalized: np.ndarray,
) -> Path:
    """Columns: n, estimate, se, asymptote, normalized."""
    rows = zip(lags, estimates, std_errors, asymptote, normalized)
    return run.write_csv(name, ["n", "estimate", "se", "asymptote", "normalized"], rows)


def export_audit_records(run: RunDirectory, report: LYAuditReport, name: str = "ly_audit.csv") -> Path:
    """One row per (h id, n): strong, weak, bound rhs, pass flag, calibration flag."""
    rows = ((r.h_id, r.n, r.strong, r.weak, r.rhs, r.passed, r.calibration) for r in report.records)
    return run.write_csv(name, ["h_id", "n", "strong", "weak", "rhs", "passed", "calibration"], rows)
