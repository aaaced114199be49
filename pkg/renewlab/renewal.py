"""
Scalar and Operator Renewal Sequences

u_n = sum_j p_j u_{n-j} for return-time probabilities p, and its operator
analogue t_n = sum_j R_j t_{n-j} applied to a grid vector, together with the
asymptotic checks built on them: first-order mixing, higher-order expansions,
Cesaro growth of partial sums and the finite-mean renewal correction.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from renewlab.errors import DegenerateObservableError, DomainError
from renewlab.fitting import log_grid, loglog_fit, power_basis, weighted_lstsq
from renewlab.maps import ReturnPartition
from renewlab.schemas import (
    CesaroReport,
    FiniteRenewalReport,
    FirstOrderReport,
    HigherOrderFit,
)
from renewlab.tails import expansion_order, mean_return_time, renewal_constant
from renewlab.transfer import DiscretizedOperator, Grid, RankOneProjection, split_by_return_time

logger = logging.getLogger(__name__)


@dataclass
class RenewalSeries:
    """
    A renewal sequence and its asymptotic fits.

    Attributes:
        kind: "scalar", "operator" or "synthetic"
        values: u_0..u_N, or t_0..t_N stacked as an (N+1) x M array
        beta: Tail index used by the fits
        d_fit: Fitted expansion coefficients d_0..d_q
        residual_exponent: Decay order of the residual after the fit
        normalization: Constants used to normalise the fit (c_hat, pairing)
    """

    kind: str
    values: np.ndarray
    beta: Optional[float] = None
    d_fit: Optional[np.ndarray] = None
    residual_exponent: Optional[float] = None
    residual_stderr: Optional[float] = None
    normalization: dict = field(default_factory=dict)
    fit: Optional[HigherOrderFit] = None

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1

    def paired(self, w: Optional[np.ndarray] = None) -> np.ndarray:
        """The scalar sequence <w, t_n> (or the values themselves for scalar series)."""
        if self.values.ndim == 1:
            return self.values
        if w is None:
            return self.values.sum(axis=1)
        return self.values @ np.asarray(w)

    @classmethod
    def synthetic(cls, values: Sequence[float], beta: Optional[float] = None) -> "RenewalSeries":
        return cls(kind="synthetic", values=np.asarray(values, dtype=float), beta=beta)


def scalar_renewal(p: Sequence[float], horizon: int) -> RenewalSeries:
    """
    u_0 = 1, u_n = sum_{j=1}^n p_j u_{n-j}.

    Args:
        p: Return-time probabilities indexed by return time, p[0] ignored and
            treated as 0; p_n beyond len(p) - 1 are 0
        horizon: Last index N

    Returns:
        RenewalSeries: kind "scalar" with values u_0..u_N

    Raises:
        DomainError: If p has negative entries or sums above 1
    """
    p = np.asarray(p, dtype=float).copy()
    if p.ndim != 1:
        raise DomainError("p must be one-dimensional")
    p[0] = 0.0
    if p.min(initial=0.0) < -1e-15 or p.sum() > 1.0 + 1e-12:
        raise DomainError("p must be a nonnegative sequence with sum at most 1")
    p = np.clip(p, 0.0, None)
    n_total = horizon + 1
    # rev[horizon - k] holds u_k so u_{n-1}..u_0 is the contiguous slice ending at horizon
    rev = np.zeros(n_total)
    rev[horizon] = 1.0
    u = np.zeros(n_total)
    u[0] = 1.0
    length = p.size - 1
    for n in range(1, n_total):
        k = min(n, length)
        value = float(np.dot(p[1 : k + 1], rev[horizon - n + 1 : horizon - n + 1 + k]))
        u[n] = value
        rev[horizon - n] = value
    return RenewalSeries(kind="scalar", values=u)


def operator_renewal_apply(op: DiscretizedOperator, v: np.ndarray, horizon: int) -> RenewalSeries:
    """
    t_0 = v, t_n = sum_{j=1}^n R_j t_{n-j}, never materializing T_n.

    Each step is one sparse product of [R_1 | ... | R_n] with the stacked
    history (t_{n-1}, ..., t_0).

    Raises:
        DomainError: If the slices are missing or horizon exceeds n_max
    """
    if op.slices is None:
        raise DomainError("split_by_return_time must run before operator_renewal_apply")
    if horizon > op.n_max:
        raise DomainError(f"horizon {horizon} exceeds n_max {op.n_max}")
    m = op.grid.M
    v = np.asarray(v, dtype=float)
    if v.shape != (m,):
        raise DomainError(f"v must have {m} entries")
    history = op.slices.history_matrix(horizon)
    indptr, indices, data = history.indptr, history.indices, history.data

    # block horizon - k of buf holds t_k
    buf = np.zeros((horizon + 1) * m)
    buf[horizon * m :] = v
    out = np.empty((horizon + 1, m))
    out[0] = v
    for n in range(1, horizon + 1):
        width = n * m
        nnz = indptr[width]
        window = sp.csc_matrix(
            (data[:nnz], indices[:nnz], indptr[: width + 1]), shape=(m, width), copy=False
        )
        t = window @ buf[(horizon - n + 1) * m :]
        out[n] = t
        buf[(horizon - n) * m : (horizon - n + 1) * m] = t
    logger.debug("Operator renewal computed to n=%d on M=%d", horizon, m)
    return RenewalSeries(kind="operator", values=out)


def rank_one_operator(p: Sequence[float], profile: np.ndarray) -> DiscretizedOperator:
    """
    Operator whose slices are R_j = p_j * profile (x) 1, with the missing mass in the overflow slice.

    Pairing its renewal series with 1 reproduces scalar_renewal(p) times <v, 1>.
    """
    p = np.asarray(p, dtype=float)
    profile = np.asarray(profile, dtype=float)
    profile = profile / profile.sum()
    m = profile.size
    base = np.outer(profile, np.ones(m))
    slices = [p[j] * base for j in range(1, p.size)]
    overflow = max(0.0, 1.0 - float(p[1:].sum())) * base
    op = DiscretizedOperator.from_slices(Grid(m), slices, overflow)
    return split_by_return_time(op, ReturnPartition.from_masses(np.concatenate([[0.0], p[1:]])))


def _window(horizon: int, window: Optional[Tuple[int, int]]) -> Tuple[int, int]:
    lo, hi = window or (max(1, horizon // 10), horizon)
    if lo < 1 or hi > horizon or hi <= lo:
        raise DomainError(f"window ({lo}, {hi}) outside the computed range 1..{horizon}")
    return lo, hi


def first_order_check(
    series: RenewalSeries,
    projection: RankOneProjection,
    v: np.ndarray,
    w: np.ndarray,
    beta: float,
    c_hat: float,
    window: Optional[Tuple[int, int]] = None,
    tolerance: float = 0.10,
) -> FirstOrderReport:
    """
    Relative error of c_hat n^(1-beta) <w, t_n> against d0 <w, P v>.

    Raises:
        DegenerateObservableError: If <w, P v> vanishes
    """
    d0 = renewal_constant(beta)
    pairing = float(np.real(np.asarray(w) @ projection.apply(np.asarray(v))))
    scale = float(np.abs(w).sum() * np.abs(v).sum()) or 1.0
    if abs(pairing) <= 1e-14 * scale:
        raise DegenerateObservableError("<w, P v> = 0; the relative error is undefined")
    target = d0 * pairing
    lo, hi = _window(series.horizon, window)
    ns = log_grid(lo, hi, 200)
    signal = series.paired(w)[ns]
    rel = np.abs(c_hat * ns ** (1.0 - beta) * signal - target) / abs(target)
    positive = rel > 0
    trend = loglog_fit(ns[positive], rel[positive]).slope if positive.sum() >= 3 else -math.inf
    last_decade = ns >= hi / 10.0
    report = FirstOrderReport(
        target=target,
        window=(lo, hi),
        max_rel_error=float(rel[last_decade].max()),
        last_rel_error=float(rel[-1]),
        trend_slope=float(trend),
        decreasing=bool(trend < 0),
        tolerance=tolerance,
    )
    logger.info("First-order check: last relative error %.4f (trend %.3f)", report.last_rel_error, trend)
    return report


def higher_order_fit(
    series: RenewalSeries,
    beta: float,
    q: Optional[int] = None,
    w: Optional[np.ndarray] = None,
    pairing: float = 1.0,
    c_hat: float = 1.0,
    window: Optional[Tuple[int, int]] = None,
    cond_max: float = 1e8,
) -> RenewalSeries:
    """
    Fit c_hat <w, t_n> / <w, P v> = sum_j d_j n^((j+1)(beta-1)) on the window.

    Returns:
        RenewalSeries: Copy carrying d_fit, the residual exponent and the fit record

    Raises:
        IllConditionedFitError: If the basis is too collinear; reduce q
    """
    q = expansion_order(beta) if q is None else q
    lo, hi = _window(series.horizon, window)
    ns = log_grid(lo, hi, 200)
    signal = c_hat * series.paired(w)[ns] / pairing
    coef, stderr, cond, residuals = weighted_lstsq(power_basis(ns, beta, q), signal, cond_max=cond_max)
    magnitude = np.abs(residuals)
    positive = magnitude > 0
    if positive.sum() >= 3:
        res_fit = loglog_fit(ns[positive], magnitude[positive])
        res_exp, res_err = res_fit.slope, res_fit.slope_stderr
    else:
        res_exp, res_err = -math.inf, 0.0
    d0 = renewal_constant(beta)
    record = HigherOrderFit(
        beta=beta,
        q=q,
        d_fit=[float(c) for c in coef],
        d_stderr=[float(s) for s in stderr],
        d0_closed_form=d0,
        d0_rel_error=abs(float(coef[0]) - d0) / d0,
        residual_exponent=float(res_exp),
        residual_stderr=float(res_err),
        window=(lo, hi),
        condition_number=cond,
    )
    logger.info("Higher-order fit q=%d: d=%s residual exponent %.3f", q, record.d_fit, res_exp)
    return replace(
        series,
        beta=beta,
        d_fit=coef,
        residual_exponent=float(res_exp),
        residual_stderr=float(res_err),
        normalization={"c_hat": c_hat, "pairing": pairing},
        fit=record,
    )


def cesaro_check(
    series: RenewalSeries,
    beta: float,
    c_hat: float = 1.0,
    w: Optional[np.ndarray] = None,
    pairing: float = 1.0,
    window: Optional[Tuple[int, int]] = None,
    slope_tolerance: float = 0.03,
    prefactor_tolerance: float = 0.10,
    mean_return: Optional[float] = None,
) -> CesaroReport:
    """
    Growth of the partial sums S_n = sum_{j<=n} s_j.

    For beta < 1 the law is S_n ~ (d0 / (c_hat beta)) pairing n^beta; for a
    finite mean (beta > 1) partial sums grow linearly, with prefactor
    pairing / mean_return when the mean is given.
    """
    lo, hi = _window(series.horizon, window)
    partial = np.cumsum(series.paired(w))
    ns = log_grid(lo, hi, 200)
    fit = loglog_fit(ns, partial[ns])
    if beta < 1.0:
        expected = beta
        law = renewal_constant(beta) / (c_hat * beta) * pairing * float(hi) ** beta
        ratio: Optional[float] = float(partial[hi] / law)
    else:
        expected = 1.0
        ratio = float(partial[hi] / (pairing * hi / mean_return)) if mean_return else None
    return CesaroReport(
        beta=beta,
        expected_slope=expected,
        slope=fit.slope,
        prefactor_ratio=ratio,
        slope_tolerance=slope_tolerance,
        prefactor_tolerance=prefactor_tolerance,
    )


def finite_renewal_check(
    series: RenewalSeries,
    partition: ReturnPartition,
    window: Optional[Tuple[int, int]] = None,
    tolerance: float = 0.15,
) -> FiniteRenewalReport:
    """
    Finite-mean renewal: u_n - 1/m against (1/m^2) sum_{k>n} mu(phi > k).
    """
    m_ret = mean_return_time(partition)
    tails = partition.tails()
    # sum_{k>n} tails[k], with nothing beyond n_max
    beyond = np.concatenate([np.cumsum(tails[::-1])[::-1][1:], [0.0]])
    lo, hi = _window(min(series.horizon, partition.n_max // 100), window)
    ns = log_grid(lo, hi, 50)
    u = series.paired()[ns]
    predicted = beyond[ns] / m_ret**2
    ratios = (u - 1.0 / m_ret) / predicted
    return FiniteRenewalReport(
        mean_return_time=m_ret,
        window=(lo, hi),
        ratios=[float(r) for r in ratios],
        last_ratio=float(ratios[-1]),
        tolerance=tolerance,
    )
