"""Regression helpers shared by the tail, renewal, correlation and norm checks."""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import stats

from renewlab.errors import DomainError, IllConditionedFitError


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    points: int


def log_grid(lo: int, hi: int, count: int = 200) -> np.ndarray:
    """Unique log-spaced integers in [lo, hi]."""
    if lo < 1 or hi < lo:
        raise DomainError(f"log grid needs 1 <= lo <= hi, got ({lo}, {hi})")
    grid = np.unique(np.rint(np.geomspace(lo, hi, count)).astype(np.int64))
    return grid[(grid >= lo) & (grid <= hi)]


def loglog_fit(x: np.ndarray, y: np.ndarray) -> LogLogFit:
    """
    Least-squares line through (log x, log y).

    Args:
        x: Positive abscissae
        y: Positive ordinates

    Returns:
        LogLogFit: slope, intercept and their standard errors

    Raises:
        DomainError: If fewer than three points or any nonpositive value
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise DomainError(f"log-log fit needs at least 3 points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("log-log fit needs positive data")
    result = stats.linregress(np.log(x), np.log(y))
    return LogLogFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        slope_stderr=float(result.stderr),
        intercept_stderr=float(result.intercept_stderr),
        points=int(x.size),
    )


def power_basis(n: np.ndarray, beta: float, q: int) -> np.ndarray:
    """Columns n^((j+1)(beta-1)) for j = 0..q."""
    n = np.asarray(n, dtype=float)
    exponents = (np.arange(q + 1) + 1.0) * (beta - 1.0)
    return n[:, None] ** exponents[None, :]


def weighted_lstsq(
    design: np.ndarray,
    target: np.ndarray,
    weights: np.ndarray | None = None,
    cond_max: float = 1e8,
) -> Tuple[np.ndarray, np.ndarray, float, np.ndarray]:
    """
    Least squares with column scaling and a condition-number gate.

    Args:
        design: Basis matrix (points x terms)
        target: Observations
        weights: Optional inverse standard deviations
        cond_max: Largest admissible condition number of the scaled basis

    Returns:
        Tuple of (coefficients, standard errors, condition number, residuals)

    Raises:
        IllConditionedFitError: If the scaled basis is too collinear
    """
    design = np.asarray(design, dtype=float)
    target = np.asarray(target, dtype=float)
    w = np.ones_like(target) if weights is None else np.asarray(weights, dtype=float)
    a = design * w[:, None]
    b = target * w
    scale = np.linalg.norm(a, axis=0)
    scale[scale == 0] = 1.0
    a_scaled = a / scale
    cond = float(np.linalg.cond(a_scaled))
    if not np.isfinite(cond) or cond > cond_max:
        raise IllConditionedFitError(
            f"basis condition number {cond:.3g} exceeds {cond_max:.3g}; reduce the expansion order q",
            condition_number=cond,
        )
    coef_scaled, *_ = np.linalg.lstsq(a_scaled, b, rcond=None)
    coef = coef_scaled / scale
    residuals = target - design @ coef
    dof = max(a.shape[0] - a.shape[1], 1)
    if weights is None:
        sigma2 = float(np.sum(residuals**2) / dof)
    else:
        sigma2 = 1.0
    cov_scaled = np.linalg.pinv(a_scaled.T @ a_scaled) * sigma2
    stderr = np.sqrt(np.clip(np.diag(cov_scaled), 0.0, None)) / scale
    return coef, stderr, cond, residuals
