"""
Return-Time Tails

Invariant masses of the return cells, the tail law mu(phi > n) ~ c n^-beta
and the renewal constants derived from it.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy import special

from renewlab.errors import DomainError, LabError, NegativeMassError
from renewlab.fitting import log_grid, loglog_fit
from renewlab.maps import IntervalMapSpec, ReturnPartition, build_return_partition
from renewlab.schemas import TailModel, TruncationReport

logger = logging.getLogger(__name__)

CLIP_FLOOR = -1e-12
ORDER_EPS = 1e-12


def _cumulative(stationary: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    m = stationary.size
    edges = np.linspace(0.5, 1.0, m + 1)
    cum = np.concatenate([[0.0], np.cumsum(stationary)])
    return edges, cum


def cell_masses(partition: ReturnPartition, stationary: np.ndarray) -> ReturnPartition:
    """
    Integrate a piecewise-constant grid density over every return cell.

    Args:
        partition: Return partition of the same map
        stationary: Cell masses of the induced invariant density on a uniform grid of Y

    Returns:
        ReturnPartition: Copy with masses[n] = mu(Y_n), per-cell masses and the gap mass as truncated_mass

    Raises:
        NegativeMassError: If a cell mass falls below -1e-12
    """
    stationary = np.asarray(stationary, dtype=float)
    if stationary.ndim != 1 or stationary.size < 2:
        raise DomainError("stationary must be a vector over at least 2 grid cells")
    edges, cum = _cumulative(stationary)
    per_cell = np.interp(partition.cell_hi, edges, cum) - np.interp(partition.cell_lo, edges, cum)
    gap_mass = sum(
        float(np.interp(b, edges, cum) - np.interp(a, edges, cum)) for a, b in partition.gaps
    )
    if per_cell.size and per_cell.min() < CLIP_FLOOR:
        worst = int(np.argmin(per_cell))
        raise NegativeMassError(
            f"cell with phi={partition.cell_n[worst]} has mass {per_cell[worst]:.3e}"
        )
    clipped = int(np.count_nonzero(per_cell < 0))
    if clipped:
        logger.warning("Clipped %d slightly negative cell masses to zero", clipped)
    per_cell = np.clip(per_cell, 0.0, None)
    gap_mass = max(gap_mass, 0.0)

    masses = np.bincount(partition.cell_n, weights=per_cell, minlength=partition.n_max + 1)
    total = float(masses.sum()) + gap_mass
    if not total > 0:
        raise NegativeMassError("stationary density carries no mass on Y")
    return partition.with_masses(masses / total, gap_mass / total, per_cell / total)


def fit_tail(
    partition: ReturnPartition, window: Tuple[int, int] = (100, 10_000), points: int = 200
) -> TailModel:
    """
    Fit mu(phi > n) = c n^-beta on a log-spaced subsample of the window.

    Args:
        partition: Partition with masses filled
        window: (n_lo, n_hi) with n_hi <= n_max and n_hi >= 10 n_lo
        points: Size of the log-spaced subsample

    Returns:
        TailModel: beta_hat, c_hat, slowly varying profile and residual order

    Raises:
        DomainError: On a bad window or nonpositive tail values in it
    """
    n_lo, n_hi = window
    if n_lo < 1 or n_hi > partition.n_max or n_hi < 10 * n_lo:
        raise DomainError(f"tail window {window} invalid for n_max={partition.n_max}")
    tails = partition.tails()
    ns = log_grid(n_lo, n_hi, points)
    values = tails[ns]
    if np.any(values <= 0):
        raise DomainError(f"nonpositive tail values inside window {window}")
    main = loglog_fit(ns, values)
    beta_hat = -main.slope
    c_hat = math.exp(main.intercept)

    residual = np.abs(values - c_hat * ns ** (-beta_hat))
    positive = residual > 0
    if positive.sum() >= 3:
        second = loglog_fit(ns[positive], residual[positive])
        residual_exponent, residual_stderr = second.slope, second.slope_stderr
    else:
        residual_exponent, residual_stderr = float("nan"), float("nan")

    ell_n = log_grid(n_lo, n_hi, 20)
    ell = ell_n.astype(float) ** beta_hat * tails[ell_n]
    logger.info("Tail fit on %s: beta_hat=%.5f c_hat=%.5g", window, beta_hat, c_hat)
    return TailModel(
        beta_hat=beta_hat,
        beta_stderr=main.slope_stderr,
        c_hat=c_hat,
        ell_n=[int(n) for n in ell_n],
        ell_profile=[float(v) for v in ell],
        residual_exponent=residual_exponent,
        residual_stderr=residual_stderr,
        fit_window=(int(n_lo), int(n_hi)),
    )


def renewal_constant(beta: float) -> float:
    """
    d0 = sin(pi beta) / pi, cross-checked against 1 / (Gamma(beta) Gamma(1 - beta)).

    Raises:
        DomainError: If beta is outside (0, 1)
    """
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    d0 = math.sin(math.pi * beta) / math.pi
    check = 1.0 / (special.gamma(beta) * special.gamma(1.0 - beta))
    if not math.isclose(d0, check, rel_tol=1e-12, abs_tol=1e-12):
        raise LabError(f"renewal constant mismatch: {d0!r} vs Gamma form {check!r}")
    return d0


def expansion_order(beta: float) -> int:
    """
    Largest j >= 0 with (j + 1) beta - j > 0.

    Values within ORDER_EPS of zero count as zero, so rational beta such as
    2/3 or 0.9 land on the boundary regardless of float rounding.
    """
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    j = 0
    while (j + 2) * beta - (j + 1) > ORDER_EPS:
        j += 1
    return j


def mean_return_time(partition: ReturnPartition) -> float:
    """Sum n p_n with the truncated mass placed at n_max + 1."""
    n = np.arange(partition.n_max + 1)
    return float(np.dot(n, partition.masses) + (partition.n_max + 1) * partition.truncated_mass)


def truncation_sensitivity(
    spec: IntervalMapSpec,
    n_max: int,
    stationary: np.ndarray,
    window: Optional[Tuple[int, int]] = None,
) -> TruncationReport:
    """Refit the tail with the partition cut at n_max / 2 and report the shift."""
    half = n_max // 2
    n_lo, n_hi = window or (max(1, half // 100), half)
    n_hi = min(n_hi, half)
    fits = []
    for depth in (n_max, half):
        partition = cell_masses(build_return_partition(spec, depth), stationary)
        fits.append(fit_tail(partition, (n_lo, n_hi)))
    return TruncationReport(
        n_max=n_max,
        n_half=half,
        beta_full=fits[0].beta_hat,
        beta_half=fits[1].beta_hat,
        c_full=fits[0].c_hat,
        c_half=fits[1].c_hat,
    )
