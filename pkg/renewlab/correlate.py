"""
Monte Carlo Correlations of Skew Products

Correlations E[v(p) w(f^n p)] are estimated over points p drawn from
mu_Y = mu_0,Y x m, the induced density in x times Lebesgue in y. Samples are
split into fixed-size blocks; each block draws from its own Philox stream keyed
by (seed, block index) and block statistics are merged in block order, so the
result depends on (seed, samples, block size) only.

In the infinite case mu is normalized by mu(Y) = 1 and every integral is the
induced one. In the finite case mu is a probability and mu(Y) = 1 / E[phi].
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from renewlab.errors import DomainError, SupportError
from renewlab.fitting import loglog_fit, power_basis, weighted_lstsq
from renewlab.maps import ReturnPartition, SkewProduct
from renewlab.renewal import operator_renewal_apply
from renewlab.schemas import ContractionReport, FiniteDecayReport, MixingReport, QuotientReport
from renewlab.tails import expansion_order, mean_return_time, renewal_constant
from renewlab.transfer import DiscretizedOperator

logger = logging.getLogger(__name__)

DEFAULT_BLOCK = 2**18


@dataclass(frozen=True)
class Observable:
    """
    Function on [0, 1]^2 supported on Y.

    Attributes:
        name: Identifier written to manifests
        func: Vectorized v(x, y)
        x_support: Interval of (1/2, 1] outside which v vanishes
        q: Hoelder exponent of the first derivative (v is C^(1+q))
        y_independent: True when v depends on x only
    """

    name: str
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    x_support: Tuple[float, float] = (0.5, 1.0)
    q: float = 0.9
    y_independent: bool = False

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.func(x, y)


def _bump(t: np.ndarray, lo: float, hi: float, q: float) -> np.ndarray:
    s = (2.0 * t - lo - hi) / (hi - lo)
    inside = np.abs(s) < 1.0
    return np.where(inside, np.clip(1.0 - s * s, 0.0, None) ** (1.0 + q), 0.0)


def bump_observable(
    x_support: Tuple[float, float],
    y_support: Optional[Tuple[float, float]] = None,
    q: float = 0.9,
    name: Optional[str] = None,
) -> Observable:
    """
    C^(1+q) bump b1(x) b2(y) with b(s) = (1 - s^2)^(1+q) on the rescaled support.

    Without a y-support the observable is y-independent.

    Raises:
        DomainError: If the x-support leaves (1/2, 1] or an interval is empty
    """
    xlo, xhi = x_support
    if not 0.5 <= xlo < xhi <= 1.0:
        raise DomainError(f"x-support {x_support} must lie inside Y = (1/2, 1]")
    if y_support is not None and not 0.0 <= y_support[0] < y_support[1] <= 1.0:
        raise DomainError(f"y-support {y_support} must lie inside [0, 1]")
    if not 0.0 < q <= 1.0:
        raise DomainError(f"smoothness q must lie in (0, 1], got {q}")
    label = name or f"bump[{xlo:g},{xhi:g}]" + (
        "" if y_support is None else f"x[{y_support[0]:g},{y_support[1]:g}]"
    )

    def func(x, y):
        value = _bump(np.asarray(x, dtype=float), xlo, xhi, q)
        if y_support is not None:
            value = value * _bump(np.asarray(y, dtype=float), y_support[0], y_support[1], q)
        return value

    return Observable(label, func, (xlo, xhi), q, y_support is None)


def indicator_y() -> Observable:
    """1_Y(x), constant in y."""
    return Observable("indicator_Y", lambda x, y: (np.asarray(x) > 0.5).astype(float), (0.5, 1.0), 1.0, True)


def _stream(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(block)))


def _inverse_cdf(stationary: np.ndarray) -> np.ndarray:
    st = np.clip(np.asarray(stationary, dtype=float), 0.0, None)
    cum = np.concatenate([[0.0], np.cumsum(st)])
    return cum / cum[-1]


def sample_induced(
    count: int, seed: int, stationary: np.ndarray, block_index: int = 0
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw points of Y from mu_0,Y x m.

    x follows the piecewise-constant grid density by inverse CDF, y is uniform.
    """
    m = stationary.size
    cum = _inverse_cdf(stationary)
    rng = _stream(seed, block_index)
    u = rng.random(count)
    j = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, m - 1)
    mass = cum[j + 1] - cum[j]
    frac = np.where(mass > 0, (u - cum[j]) / np.where(mass > 0, mass, 1.0), 0.5)
    x = 0.5 + (j + np.clip(frac, 0.0, 1.0)) * (0.5 / m)
    x = np.where(x > 0.5, x, np.nextafter(0.5, 1.0))
    x = np.minimum(x, 1.0)
    y = rng.random(count)
    return x, y


@dataclass
class CorrelationSeries:
    """
    Lagged correlation estimates with standard errors.

    Attributes:
        lags: Lags n
        estimates: Sample means of v(p) w(f^n p)
        std_errors: Sample standard deviation / sqrt(samples)
        sample_count: Number of points
        seed: Master seed
        block_size: Samples per RNG block
        observables: Names of (v, w)
    """

    lags: np.ndarray
    estimates: np.ndarray
    std_errors: np.ndarray
    sample_count: int
    seed: int
    block_size: int
    observables: Tuple[str, str]


def _block_moments(sp_map, v, w, lags, count, seed, block, stationary):
    x, y = sample_induced(count, seed, stationary, block)
    v0 = v(x, y)
    live = np.nonzero(v0)[0]
    x, y, v0 = x[live], y[live], v0[live]
    sums = np.zeros(len(lags))
    sumsq = np.zeros(len(lags))
    step = 0
    for k, lag in enumerate(lags):
        while step < lag:
            y = sp_map.fiber(x, y)
            x = sp_map.base.apply(x)
            step += 1
        wn = w(x, y)
        outside = (x <= 0.5) & (wn != 0)
        if np.any(outside):
            raise SupportError(f"observable {getattr(w, 'name', 'w')} is nonzero off Y at lag {lag}")
        prod = v0 * wn
        sums[k] = prod.sum()
        sumsq[k] = np.dot(prod, prod)
    mean = sums / count
    m2 = sumsq - count * mean * mean
    return count, mean, np.clip(m2, 0.0, None)


def _merge(a, b):
    """Chan's pairwise update of (count, mean, M2)."""
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    delta = mb - ma
    mean = ma + delta * (nb / n)
    m2 = sa + sb + delta * delta * (na * nb / n)
    return n, mean, m2


def correlation_series(
    sp_map: SkewProduct,
    v: Observable,
    w: Observable,
    lags: Sequence[int],
    samples: int,
    seed: int,
    stationary: np.ndarray,
    block_size: int = DEFAULT_BLOCK,
    threads: int = 1,
) -> CorrelationSeries:
    """
    Estimate E[v(p) w(f^n p)] for every lag with raw steps of f.

    Raises:
        SupportError: If w is nonzero at an iterate outside Y
    """
    lags = np.asarray(sorted(set(int(n) for n in lags)), dtype=np.int64)
    if lags.size == 0 or lags[0] < 0:
        raise DomainError("lags must be nonnegative and nonempty")
    if samples < 2:
        raise DomainError("at least two samples are required")
    counts = [block_size] * (samples // block_size)
    if samples % block_size:
        counts.append(samples % block_size)

    def run(block: int):
        return _block_moments(sp_map, v, w, lags, counts[block], seed, block, stationary)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run, range(len(counts))))
    total = results[0]
    for part in results[1:]:
        total = _merge(total, part)
    n, mean, m2 = total
    std = np.sqrt(m2 / (n - 1))
    logger.info("Correlation series %s/%s: %d samples, %d blocks, %d lags", v.name, w.name, n, len(counts), lags.size)
    return CorrelationSeries(
        lags=lags,
        estimates=mean,
        std_errors=std / math.sqrt(n),
        sample_count=int(n),
        seed=seed,
        block_size=block_size,
        observables=(v.name, w.name),
    )


def correlation_mc(
    sp_map: SkewProduct,
    v: Observable,
    w: Observable,
    n: int,
    samples: int,
    seed: int,
    stationary: np.ndarray,
    block_size: int = DEFAULT_BLOCK,
    threads: int = 1,
) -> Tuple[float, float]:
    """Single-lag estimate and standard error."""
    series = correlation_series(sp_map, v, w, [n], samples, seed, stationary, block_size, threads)
    return float(series.estimates[0]), float(series.std_errors[0])


def quadrature_integral(
    obs: Observable, stationary: np.ndarray, nodes_x: int = 4, panels_y: int = 128
) -> float:
    """
    Integral of obs against mu_0,Y x m for a piecewise-constant grid density.

    Gauss-Legendre nodes inside every grid cell in x and on composite panels in y.
    """
    m = stationary.size
    width = 0.5 / m
    gx, wx = np.polynomial.legendre.leggauss(nodes_x)
    gy, wy = np.polynomial.legendre.leggauss(4)
    centers = 0.5 + (np.arange(m) + 0.5) * width
    xs = centers[:, None] + 0.5 * width * gx[None, :]
    panel = 1.0 / panels_y
    ys = ((np.arange(panels_y) + 0.5) * panel)[:, None] + 0.5 * panel * gy[None, :]
    ys = ys.ravel()
    wys = np.tile(0.5 * panel * wy, panels_y)
    total = 0.0
    for k in range(nodes_x):
        values = obs(xs[:, k][:, None], ys[None, :])
        values = np.broadcast_to(values, (m, ys.size))
        total += 0.5 * wx[k] * float(np.dot(stationary, values @ wys))
    return total


def quotient_prediction(
    op: DiscretizedOperator,
    v: Observable,
    w: Observable,
    stationary: np.ndarray,
    lags: Sequence[int],
) -> np.ndarray:
    """
    Operator-renewal prediction of E[v w(f^n)] for a y-independent w.

    The start vector carries the v-weighted stationary masses of each cell;
    t_n = T_n a is paired with the cell averages of w.

    Raises:
        DomainError: If w depends on y or the lags exceed the slice horizon
    """
    if not w.y_independent:
        raise DomainError("the quotient prediction needs a y-independent w")
    grid = op.grid
    m = grid.M
    lags = np.asarray(lags, dtype=np.int64)
    gx, wx = np.polynomial.legendre.leggauss(4)
    gy, wy = np.polynomial.legendre.leggauss(32)
    ys = 0.5 * (gy + 1.0)
    xs = grid.centers[:, None] + 0.5 * grid.width * gx[None, :]
    v_avg = np.zeros(m)
    w_avg = np.zeros(m)
    for k in range(gx.size):
        vx = v(xs[:, k][:, None], ys[None, :])
        v_avg += 0.5 * wx[k] * (np.broadcast_to(vx, (m, ys.size)) @ (0.5 * wy))
        w_avg += 0.5 * wx[k] * np.broadcast_to(w(xs[:, k], np.zeros(m)), (m,))
    start = stationary * v_avg
    series = operator_renewal_apply(op, start, int(lags.max()))
    return series.values[lags] @ w_avg


def quotient_cross_check(
    series: CorrelationSeries, prediction: np.ndarray, threshold: float = 3.0, allowance: float = 0.0
) -> QuotientReport:
    """Per-lag z-scores |estimate - prediction| / se, with an optional relative allowance."""
    excess = np.abs(series.estimates - prediction) - allowance * np.abs(prediction)
    z = np.clip(excess, 0.0, None) / np.where(series.std_errors > 0, series.std_errors, np.inf)
    return QuotientReport(
        lags=[int(n) for n in series.lags],
        z_scores=[float(s) for s in z],
        max_z=float(z.max(initial=0.0)),
        threshold=threshold,
    )


def mixing_rate_check(
    series: CorrelationSeries,
    beta: float,
    iv: float,
    iw: float,
    c_hat: float,
    q: Optional[int] = None,
    tolerance: float = 0.15,
) -> MixingReport:
    """
    Weighted fit of c_hat corr(n) = sum_j D_j n^((j+1)(beta-1)) on lags above the noise floor.

    D_0 is compared with d0 Iv Iw; when Iv Iw = 0 the check asks that D_0 be
    within 2 standard errors of 0. With no lag above 3 se the report is
    flagged inconclusive.
    """
    d0 = renewal_constant(beta)
    target = d0 * iv * iw
    lags = series.lags.astype(float)
    est = series.estimates
    se = series.std_errors
    signal = (lags > 0) & (np.abs(est) > 3.0 * se)
    count = int(signal.sum())
    q = expansion_order(beta) if q is None else q
    if count < 2:
        logger.warning("Mixing check inconclusive: %d lags above the noise floor", count)
        return MixingReport(
            beta=beta, q=q, iv=iv, iw=iw, signal_lags=count, inconclusive=True,
            d_fit=[], d_stderr=[], target=target, tolerance=tolerance,
        )
    q = min(q, count - 2) if count > 2 else 0
    ns = lags[signal]
    coef, stderr, _, residuals = weighted_lstsq(
        power_basis(ns, beta, q), c_hat * est[signal], weights=1.0 / (c_hat * se[signal])
    )
    dof = max(count - (q + 1), 1)
    chi2 = float(np.sum((residuals / (c_hat * se[signal])) ** 2) / dof)
    report = MixingReport(
        beta=beta,
        q=q,
        iv=iv,
        iw=iw,
        signal_lags=count,
        inconclusive=False,
        d_fit=[float(c) for c in coef],
        d_stderr=[float(s) for s in stderr],
        target=target,
        chi2_per_dof=chi2,
        tolerance=tolerance,
    )
    if abs(target) > 0:
        report.d0_rel_error = abs(float(coef[0]) - target) / abs(target)
        normalized = c_hat * ns ** (1.0 - beta) * est[signal]
        report.max_first_order_deviation = float(np.max(np.abs(normalized - target)) / abs(target))
    else:
        report.consistent_with_zero = bool(abs(coef[0]) <= 2.0 * stderr[0])
    return report


def finite_decay_check(
    series: CorrelationSeries,
    iv: float,
    iw: float,
    beta: float,
    partition: ReturnPartition,
    slope_tolerance: float = 0.15,
    prefactor_tolerance: float = 0.30,
) -> FiniteDecayReport:
    """
    Decay of |corr(n) - Iv Iw| for a finite invariant measure (beta > 1).

    Induced estimates are rescaled to the invariant probability with
    mu(Y) = 1 / E[phi]. The prefactor is compared with
    n^(beta-1) sum_{k>n} mu(phi > k) taken from the measured tail.
    """
    if not beta > 1.0:
        raise DomainError(f"finite decay needs beta > 1, got {beta}")
    mu_y = 1.0 / mean_return_time(partition)
    corr = mu_y * series.estimates
    se = mu_y * series.std_errors
    limit = (mu_y * iv) * (mu_y * iw)
    diff = np.abs(corr - limit)
    lags = series.lags
    signal = (lags > 0) & (diff > 3.0 * se)
    count = int(signal.sum())
    expected = -(beta - 1.0)
    tails = mu_y * partition.tails()
    beyond = np.concatenate([np.cumsum(tails[::-1])[::-1][1:], [0.0]])
    if count < 3 or limit == 0:
        logger.warning("Finite decay check inconclusive: %d lags above the noise floor", count)
        return FiniteDecayReport(
            beta=beta, mu_y=mu_y, signal_lags=count, inconclusive=True, slope=float("nan"),
            slope_stderr=float("nan"), expected_slope=expected, c0_fit=float("nan"),
            c0_tail=float("nan"), slope_tolerance=slope_tolerance, prefactor_tolerance=prefactor_tolerance,
        )
    ns = lags[signal]
    fit = loglog_fit(ns, diff[signal])
    c0_fit = float(np.median(diff[signal] * ns ** (beta - 1.0) / limit))
    c0_tail = float(np.median(beyond[ns] * ns ** (beta - 1.0)))
    return FiniteDecayReport(
        beta=beta,
        mu_y=mu_y,
        signal_lags=count,
        inconclusive=False,
        slope=fit.slope,
        slope_stderr=fit.slope_stderr,
        expected_slope=expected,
        c0_fit=c0_fit,
        c0_tail=c0_tail,
        slope_tolerance=slope_tolerance,
        prefactor_tolerance=prefactor_tolerance,
    )


def fiber_contraction_check(
    sp_map: SkewProduct, samples: int, steps: int, seed: int
) -> ContractionReport:
    """
    Two points on one vertical fiber: |dy_n| <= |dy_0| 2^-(completed returns).
    """
    rng = np.random.default_rng(seed)
    x = 0.5 + 0.5 * (1.0 - rng.random(samples))
    y1 = rng.random(samples)
    y2 = rng.random(samples)
    dy0 = np.abs(y1 - y2)
    returns = np.zeros(samples)
    for _ in range(steps):
        y1 = sp_map.fiber(x, y1)
        y2 = sp_map.fiber(x, y2)
        x = sp_map.base.apply(x)
        returns += x > 0.5
    keep = dy0 > 0
    ratio = np.abs(y1 - y2)[keep] / (dy0[keep] * np.exp2(-returns[keep]))
    return ContractionReport(samples=samples, steps=steps, max_ratio=float(ratio.max(initial=0.0)))
