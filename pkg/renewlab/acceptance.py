"""
Acceptance Gates for renewlab

Each subcommand is a cell that computes its experiment on a shared
Laboratory, writes its CSV files into the run directory and returns named
gates. Tolerances are multiplied by the gate slack. `accept` dispatches the
enabled cells to a thread pool and finishes with the determinism rerun.
"""

import hashlib
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from renewlab.config import RuntimeSettings
from renewlab.correlate import (
    CorrelationSeries,
    bump_observable,
    correlation_series,
    fiber_contraction_check,
    finite_decay_check,
    mixing_rate_check,
    quadrature_integral,
    quotient_cross_check,
    quotient_prediction,
)
from renewlab.errors import ConfigError, ConvergenceError, GateFailure, LabError
from renewlab.maps import (
    IntervalMapSpec,
    ReturnPartition,
    SkewProduct,
    build_return_partition,
    check_hyperbolicity,
    coverage_check,
    map_spec_from_config,
    skew_from_config,
)
from renewlab.norms import distortion_bounds, ly_audit, mixed_samples, slice_norm_decay
from renewlab.renewal import (
    RenewalSeries,
    cesaro_check,
    finite_renewal_check,
    first_order_check,
    higher_order_fit,
    operator_renewal_apply,
    rank_one_operator,
    scalar_renewal,
)
from renewlab.schemas import ExperimentConfig, GateResult, MapConfig, TailModel
from renewlab.storage import (
    RunDirectory,
    export_audit_records,
    export_correlation_csv,
    export_operator_triplets,
    export_partition_csv,
    export_series_csv,
    export_tail_csv,
)
from renewlab.tails import cell_masses, fit_tail, renewal_constant, truncation_sensitivity
from renewlab.transfer import (
    DiscretizedOperator,
    Grid,
    SpectralData,
    build_induced_operator,
    eigenvalue_asymptotics,
    lambda_sweep,
    leading_eigen,
    refinement_check,
    slice_mass_decay,
    spectral_projection_check,
    split_by_return_time,
)

logger = logging.getLogger(__name__)

DETERMINISM_FILES = (
    "partition.csv",
    "tail.csv",
    "scalar_series.csv",
    "operator_series.csv",
    "finite_series.csv",
)
HYPERBOLICITY_SAMPLES = 10_000


def _gate(
    name: str,
    passed: bool,
    value: Optional[float] = None,
    tolerance: Optional[float] = None,
    detail: str = "",
) -> GateResult:
    return GateResult(
        name=name,
        passed=bool(passed),
        value=None if value is None else float(value),
        tolerance=None if tolerance is None else float(tolerance),
        detail=detail,
    )


# ============================================================================
# Shared State
# ============================================================================


class Workbench:
    """
    Lazily built objects of one interval map: partition, operators, stationary
    density, cell masses and tail model. Builds are serialized by a lock so
    concurrent cells share one copy.
    """

    def __init__(self, map_config: MapConfig, config: ExperimentConfig, name: str):
        self.map_config = map_config
        self.config = config
        self.name = name
        self._lock = threading.RLock()
        self._memo: Dict[object, object] = {}

    def _memo_get(self, key, build: Callable[[], object]):
        with self._lock:
            if key not in self._memo:
                logger.info("Building %s for the %s map", key, self.name)
                self._memo[key] = build()
            return self._memo[key]

    @property
    def spec(self) -> IntervalMapSpec:
        return self._memo_get("spec", lambda: map_spec_from_config(self.map_config))

    @property
    def skew(self) -> SkewProduct:
        return self._memo_get("skew", lambda: skew_from_config(self.map_config))

    @property
    def partition(self) -> ReturnPartition:
        return self._memo_get("partition", lambda: build_return_partition(self.spec, self.config.n_max))

    def operator(self, m: Optional[int] = None) -> DiscretizedOperator:
        m = m or self.config.grid_size

        def build():
            op = build_induced_operator(
                self.spec, self.partition, Grid(m), exact_levels=self.config.exact_levels
            )
            return split_by_return_time(op, self.partition)

        return self._memo_get(("operator", m), build)

    def spectral(self, m: Optional[int] = None) -> SpectralData:
        m = m or self.config.grid_size
        return self._memo_get(("spectral", m), lambda: leading_eigen(self.operator(m).matrix))

    @property
    def stationary(self) -> np.ndarray:
        return self._memo_get("stationary", lambda: np.real(self.spectral().right).astype(float))

    @property
    def weighted(self) -> ReturnPartition:
        return self._memo_get("weighted", lambda: cell_masses(self.partition, self.stationary))

    @property
    def tail_model(self) -> TailModel:
        window = (self.config.tail_window[0], min(self.config.tail_window[1], self.config.n_max))
        return self._memo_get("tail_model", lambda: fit_tail(self.weighted, window))


class Laboratory:
    """
    Everything a cell needs: configuration, settings, run directory and the
    workbenches of the main, finite-measure, non-Markov and Cesaro (LSV at
    alpha = 1 / synthetic_beta) maps.
    """

    def __init__(self, config: ExperimentConfig, settings: RuntimeSettings, run: RunDirectory):
        self.config = config
        self.settings = settings
        self.run = run
        self.slack = config.gate_slack or settings.gate_slack
        self.threads = config.threads or settings.threads
        self.block_size = settings.block_size
        self.main = Workbench(config.map, config, "main")
        self.finite = Workbench(config.finite_map, config, "finite")
        self.nonmarkov = Workbench(config.nonmarkov_map, config, "nonmarkov")
        self.cesaro = Workbench(
            MapConfig(kind="lsv", alpha=1.0 / config.synthetic_beta), config, "cesaro"
        )
        self.observables: List[str] = []


# ============================================================================
# Cells
# ============================================================================


def run_tails(lab: Laboratory) -> List[GateResult]:
    """Partition, tail fit, coverage, truncation sensitivity and hyperbolicity."""
    bench = lab.main
    beta = bench.spec.beta
    model = bench.tail_model
    tol = 0.02 * lab.slack
    gates = [
        _gate(
            "tail beta_hat",
            abs(model.beta_hat - beta) <= tol,
            model.beta_hat,
            tol,
            f"beta={beta:.6g} c_hat={model.c_hat:.6g} window={model.fit_window}",
        )
    ]
    partition = bench.weighted
    covered = float(partition.lengths.sum()) / 0.5
    gates.append(_gate("partition coverage", not partition.low_coverage, covered, 0.99))
    coverage = coverage_check(bench.spec)
    gates.append(_gate("branch coverage", coverage.passed, min(coverage.coverage), coverage.threshold, coverage.caveat))
    trunc = truncation_sensitivity(bench.spec, lab.config.n_max, bench.stationary)
    shift = abs(trunc.beta_full - trunc.beta_half)
    gates.append(
        _gate("tail truncation", shift <= tol, shift, tol, f"c_full={trunc.c_full:.6g} c_half={trunc.c_half:.6g}")
    )
    for label, sp in (("hyperbolicity", bench.skew), ("non-Markov hyperbolicity", lab.nonmarkov.skew)):
        report = check_hyperbolicity(sp, HYPERBOLICITY_SAMPLES, lab.config.seed)
        gates.append(
            _gate(label, report.passed, report.stable_max, report.stable_bound, f"cone_max={report.cone_max:.4g}")
        )
    export_partition_csv(lab.run, partition)
    export_tail_csv(lab.run, partition, model)
    return gates


def run_spectrum(lab: Laboratory) -> List[GateResult]:
    """Projection, eigenvalue asymptotics, refinement and slice decay."""
    bench = lab.main
    config = lab.config
    beta = bench.spec.beta
    m = config.spectrum_grid_size
    op = bench.operator(m)
    gates = []

    projection = spectral_projection_check(op, bench.spectral(m), seed=config.seed)
    gates.append(
        _gate("stationary projection", projection.passed, projection.worst_holdout_ratio, 2.0, f"gap={projection.gap:.4g}")
    )

    us = np.geomspace(config.u_min, config.u_max, config.u_count)
    asym = eigenvalue_asymptotics(op, us, beta, bench.tail_model.c_hat)
    slope_tol = 0.05 * lab.slack
    gates.append(_gate("eigenvalue slope", abs(asym.slope - beta) <= slope_tol, asym.slope, slope_tol))
    pre_tol = 0.10 * lab.slack
    gates.append(_gate("eigenvalue prefactor", asym.prefactor_error <= pre_tol, asym.prefactor_error, pre_tol))
    lam = 1.0 - np.asarray(asym.one_minus_lambda)
    fitted = np.exp(np.log(asym.prefactor) + beta * np.log(us)) if asym.prefactor > 0 else np.full(us.size, np.nan)
    lab.run.write_csv(
        "lambda.csv",
        ["u", "lambda", "one_minus_lambda", "asymptote"],
        zip(us, lam, asym.one_minus_lambda, fitted),
    )
    try:
        rotated = lambda_sweep(op, [config.u_max], thetas=(0.25, 0.5), tol=1e-9)
        lab.run.write_csv(
            "lambda_rotated.csv",
            ["z_real", "z_imag", "lambda_real", "lambda_imag", "gap"],
            ((s.z_real, s.z_imag, s.lambda_real, s.lambda_imag, s.gap) for s in rotated),
        )
    except ConvergenceError as exc:
        logger.warning("Rotated eigenvalue diagnostics skipped: %s", exc.detail)

    refine = refinement_check(
        bench.spec, bench.partition, config.grid_size, exact_levels=config.exact_levels, tolerance=1e-3 * lab.slack
    )
    gates.append(_gate("grid refinement", refine.passed, refine.difference, refine.tolerance))

    decay = slice_mass_decay(bench.operator(), window=config.tail_window)
    decay_tol = 0.05 * lab.slack
    gates.append(
        _gate("slice mass slope", abs(decay.slope + 1.0 + beta) <= decay_tol, decay.slope, decay_tol,
              f"column_slope={decay.column_slope:.4f}")
    )
    gates.append(_gate("slice identity", decay.identity_error <= 1e-12, decay.identity_error, 1e-12))
    export_operator_triplets(lab.run, bench.operator())
    return gates


def _synthetic_masses(beta: float, horizon: int) -> np.ndarray:
    n = np.arange(horizon + 2, dtype=float)
    p = np.zeros(horizon + 1)
    p[1:] = n[1 : horizon + 1] ** -beta - n[2 : horizon + 2] ** -beta
    return p


def run_renewal(lab: Laboratory) -> List[GateResult]:
    """Scalar oracles, rank-one equivalence, operator first order and finite renewal."""
    config = lab.config
    gates = []

    geometric = 0.5 ** np.arange(60)
    geometric[0] = 0.0
    u = scalar_renewal(geometric, 50).values
    err = float(np.abs(u[1:] - 0.5).max())
    gates.append(_gate("scalar geometric", err <= 1e-12, err, 1e-12))

    bs, horizon = config.synthetic_beta, config.synthetic_horizon
    synthetic = scalar_renewal(_synthetic_masses(bs, horizon), horizon)
    d0 = renewal_constant(bs)
    rel = abs(horizon ** (1.0 - bs) * synthetic.values[horizon] - d0) / d0
    tol = 0.10 * lab.slack
    gates.append(_gate("scalar oracle", rel <= tol, rel, tol, f"beta={bs:g} N={horizon}"))
    lsv_masses = lab.cesaro.weighted
    cesaro = cesaro_check(
        scalar_renewal(lsv_masses.renewal_masses(), horizon),
        bs,
        c_hat=lab.cesaro.tail_model.c_hat,
        slope_tolerance=0.03 * lab.slack,
        prefactor_tolerance=0.10 * lab.slack,
    )
    gates.append(
        _gate("cesaro growth", cesaro.passed, cesaro.slope, cesaro.slope_tolerance,
              f"LSV alpha={1.0 / bs:g} expected={cesaro.expected_slope:g} prefactor_ratio={cesaro.prefactor_ratio}")
    )
    ns = np.arange(synthetic.values.size, dtype=float)
    with np.errstate(divide="ignore"):
        export_series_csv(lab.run, "scalar_series.csv", synthetic.values, d0 * ns ** (bs - 1.0))

    rng = np.random.default_rng(config.seed)
    worst = 0.0
    for _ in range(5):
        p = rng.random(41)
        p[0] = 0.0
        p *= 0.95 / p[1:].sum()
        profile = rng.random(16) + 0.1
        v = rng.random(16)
        op = rank_one_operator(p, profile)
        paired = operator_renewal_apply(op, v, 40).paired()
        scalar = scalar_renewal(p, 40).values * v.sum()
        worst = max(worst, float(np.abs(paired - scalar).max()))
    gates.append(_gate("oracle equivalence", worst <= 1e-12, worst, 1e-12))

    bench = lab.main
    beta = bench.spec.beta
    c_hat = bench.tail_model.c_hat
    op = bench.operator()
    m = op.grid.M
    v = np.full(m, 1.0 / m)
    w = np.ones(m)
    horizon = min(config.horizon, op.n_max)
    series = operator_renewal_apply(op, v, horizon)
    first = first_order_check(series, bench.spectral().projection, v, w, beta, c_hat, tolerance=0.10 * lab.slack)
    gates.append(
        _gate("operator first order", first.passed, first.max_rel_error, first.tolerance,
              f"trend={first.trend_slope:.3f}")
    )
    ns = np.arange(horizon + 1, dtype=float)
    with np.errstate(divide="ignore"):
        export_series_csv(lab.run, "operator_series.csv", series.paired(w), first.target * ns ** (beta - 1.0) / c_hat)

    finite = lab.finite.weighted
    finite_series = scalar_renewal(finite.renewal_masses(), max(finite.n_max // 100, 10))
    fr = finite_renewal_check(finite_series, finite, tolerance=0.15 * lab.slack)
    gates.append(
        _gate("finite renewal", fr.passed, fr.last_ratio, fr.tolerance, f"mean_return={fr.mean_return_time:.6g}")
    )
    export_series_csv(
        lab.run,
        "finite_series.csv",
        finite_series.values,
        np.full(finite_series.values.size, 1.0 / fr.mean_return_time),
    )
    return gates


def rates_series(bench: Workbench, horizon: int) -> RenewalSeries:
    """
    Higher-order fit of <1, t_n> / <1, P v> for the operator series started at v = Lebesgue on Y.

    Raises:
        ConfigError: If the map is not Markov
    """
    if not bench.spec.markov:
        raise ConfigError("rates needs a Markov map")
    op = bench.operator()
    horizon = min(horizon, op.n_max)
    m = op.grid.M
    v = np.full(m, 1.0 / m)
    w = np.ones(m)
    pairing = float(np.real(w @ bench.spectral().projection.apply(v)))
    series = operator_renewal_apply(op, v, horizon)
    return higher_order_fit(series, bench.spec.beta, w=w, pairing=pairing, c_hat=bench.tail_model.c_hat)


def run_rates(lab: Laboratory) -> List[GateResult]:
    """Higher-order expansion of the operator renewal sequence (Markov maps)."""
    bench = lab.main
    series = rates_series(bench, lab.config.rates_horizon)
    beta = bench.spec.beta
    c_hat = series.normalization["c_hat"]
    pairing = series.normalization["pairing"]
    horizon = series.horizon
    fit = series.fit
    # quotient cross-check: the scalar renewal of the cell masses under the same fit
    scalar = scalar_renewal(bench.weighted.renewal_masses(), horizon)
    quotient = higher_order_fit(scalar, beta, c_hat=c_hat).fit
    d0_tol = 0.05 * lab.slack
    res_tol = 0.1 * lab.slack
    gates = [
        _gate("higher-order d0", fit.d0_rel_error <= d0_tol, fit.d0_rel_error, d0_tol,
              f"q={fit.q} d={[round(d, 6) for d in fit.d_fit]} scalar_d0_error={quotient.d0_rel_error:.4g}"),
        _gate("higher-order residual", fit.residual_exponent <= -beta + res_tol, fit.residual_exponent,
              -beta + res_tol),
    ]
    ns = np.arange(horizon + 1, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        expansion = pairing * sum(d * ns ** ((j + 1) * (beta - 1.0)) for j, d in enumerate(fit.d_fit)) / c_hat
    export_series_csv(lab.run, "rates_series.csv", series.paired(), expansion)
    export_series_csv(lab.run, "rates_scalar_series.csv", scalar.values, expansion / pairing)
    return gates


def _export_correlations(lab: Laboratory, name: str, series: CorrelationSeries, beta: float, target: float, c_hat: float):
    lags = series.lags.astype(float)
    with np.errstate(divide="ignore"):
        asymptote = target * lags ** (beta - 1.0) / c_hat
    normalized = c_hat * lags ** (1.0 - beta) * series.estimates
    export_correlation_csv(lab.run, name, series.lags, series.estimates, series.std_errors, asymptote, normalized)


def run_mix(lab: Laboratory) -> List[GateResult]:
    """Monte Carlo mixing: Markov, non-Markov (first order) and finite-measure decay."""
    config = lab.config
    gates = []
    v = bump_observable((0.55, 0.95), (0.2, 0.8), name="v_bump_xy")
    w = bump_observable((0.6, 0.9), name="w_bump_x")
    lab.observables.extend([v.name, w.name])
    lags = config.lag_grid()
    tol = 0.15 * lab.slack

    bench = lab.main
    beta = bench.spec.beta
    c_hat = bench.tail_model.c_hat
    stationary = bench.stationary
    iv, iw = quadrature_integral(v, stationary), quadrature_integral(w, stationary)
    series = correlation_series(
        bench.skew, v, w, lags, config.samples, config.seed, stationary, lab.block_size, lab.threads
    )
    report = mixing_rate_check(series, beta, iv, iw, c_hat, tolerance=tol)
    gates.append(
        _gate("mixing d0", report.passed, report.d0_rel_error, tol,
              f"signal_lags={report.signal_lags} Iv={iv:.6g} Iw={iw:.6g}")
    )
    _export_correlations(lab, "correlation_markov.csv", series, beta, report.target, c_hat)

    prediction = quotient_prediction(bench.operator(), v, w, stationary, series.lags)
    cross = quotient_cross_check(series, prediction, threshold=3.0 * lab.slack, allowance=0.01)
    gates.append(_gate("quotient cross-check", cross.passed, cross.max_z, cross.threshold))

    contraction = fiber_contraction_check(bench.skew, 10_000, 64, config.seed)
    gates.append(_gate("fiber contraction", contraction.passed, contraction.max_ratio, 1.0))

    nm = lab.nonmarkov
    nm_stationary = nm.stationary
    iv_nm, iw_nm = quadrature_integral(v, nm_stationary), quadrature_integral(w, nm_stationary)
    nm_series = correlation_series(
        nm.skew, v, w, lags, config.samples, config.seed, nm_stationary, lab.block_size, lab.threads
    )
    nm_report = mixing_rate_check(nm_series, nm.spec.beta, iv_nm, iw_nm, nm.tail_model.c_hat, q=0, tolerance=tol)
    gates.append(
        _gate("non-Markov mixing d0", nm_report.passed, nm_report.d0_rel_error, tol,
              f"signal_lags={nm_report.signal_lags}")
    )
    _export_correlations(lab, "correlation_nonmarkov.csv", nm_series, nm.spec.beta, nm_report.target, nm.tail_model.c_hat)

    fb = lab.finite
    f_stationary = fb.stationary
    iv_f, iw_f = quadrature_integral(v, f_stationary), quadrature_integral(w, f_stationary)
    f_series = correlation_series(
        fb.skew,
        v,
        w,
        config.lag_grid(config.finite_lag_min, config.finite_lag_max),
        config.samples,
        config.seed,
        f_stationary,
        lab.block_size,
        lab.threads,
    )
    decay = finite_decay_check(
        f_series, iv_f, iw_f, fb.spec.beta, fb.weighted,
        slope_tolerance=0.15 * lab.slack, prefactor_tolerance=0.30 * lab.slack,
    )
    gates.append(
        _gate("finite decay", decay.passed, decay.slope, decay.slope_tolerance,
              f"expected={decay.expected_slope:g} c0_fit={decay.c0_fit:.4g} c0_tail={decay.c0_tail:.4g}")
    )
    export_correlation_csv(
        lab.run,
        "correlation_finite.csv",
        f_series.lags,
        f_series.estimates,
        f_series.std_errors,
        np.full(f_series.lags.size, iv_f * iw_f * decay.mu_y),
        decay.mu_y * f_series.estimates,
    )
    return gates


def run_norms(lab: Laboratory) -> List[GateResult]:
    """Lasota-Yorke audit, slice norm decay and distortion on the Markov skew product."""
    config = lab.config
    bench = lab.main
    samples = mixed_samples(config.grid_x, config.grid_y, config.audit_samples, config.seed)
    audit = ly_audit(
        bench.skew,
        bench.partition,
        samples,
        config.audit_powers,
        q=config.norm_q,
        basis_size=config.basis_size,
        slack=1.25 * lab.slack,
    )
    export_audit_records(lab.run, audit)
    stability_tol = 0.02 * lab.slack
    gates = [
        _gate("LY audit", audit.passed, audit.fitted_c, audit.slack,
              f"excess_ratio={audit.excess_ratio} contraction_visible={audit.contraction_visible}"),
        _gate("basis stability", audit.basis_stability <= stability_tol, audit.basis_stability, stability_tol),
    ]
    decay = slice_norm_decay(
        bench.skew,
        bench.partition,
        config.grid_x,
        config.grid_y,
        window=(10, min(2000, config.n_max)),
        q=config.norm_q,
        basis_size=config.basis_size,
        tolerance=0.1 * lab.slack,
    )
    gates.append(_gate("slice norm slope", decay.passed, decay.slope, decay.tolerance, f"expected={decay.expected_slope:.4f}"))
    lab.run.write_csv("norm_decay.csv", ["n", "strong"], zip(decay.levels, decay.strong))
    distortion = distortion_bounds(bench.spec, bench.partition)
    gates.append(_gate("distortion", distortion.passed, distortion.refinement_change, 0.1))
    return gates


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_determinism(lab: Laboratory) -> List[GateResult]:
    """
    Rerun tails and renewal into a sibling directory and compare CSV bytes;
    repeat a short Monte Carlo series with one thread and with the pool.
    """
    present = [name for name in DETERMINISM_FILES if lab.run.file(name).exists()]
    if not present:
        run_tails(lab)
        run_renewal(lab)
        present = [name for name in DETERMINISM_FILES if lab.run.file(name).exists()]
    twin = Laboratory(lab.config, lab.settings, RunDirectory(Path(f"{lab.run.path}-rerun")))
    run_tails(twin)
    run_renewal(twin)
    mismatched = [n for n in present if _digest(lab.run.file(n)) != _digest(twin.run.file(n))]

    bench = lab.main
    v = bump_observable((0.55, 0.95), (0.2, 0.8))
    w = bump_observable((0.6, 0.9))
    lags = lab.config.lag_grid()[:5]
    samples = min(lab.config.samples, 2 * lab.block_size + lab.block_size // 2)
    runs = [
        correlation_series(bench.skew, v, w, lags, samples, lab.config.seed, bench.stationary, lab.block_size, t)
        for t in (1, max(2, lab.threads))
    ]
    if runs[0].estimates.tobytes() != runs[1].estimates.tobytes():
        mismatched.append("monte-carlo thread layout")
    return [
        _gate("determinism", not mismatched, len(mismatched), 0, ", ".join(mismatched) or f"{len(present)} files")
    ]


SUBCOMMANDS: Dict[str, Callable[[Laboratory], List[GateResult]]] = {
    "tails": run_tails,
    "spectrum": run_spectrum,
    "renewal": run_renewal,
    "mix": run_mix,
    "rates": run_rates,
    "norms": run_norms,
    "determinism": run_determinism,
}


def accept(lab: Laboratory) -> List[GateResult]:
    """
    Run every enabled cell on a worker pool, then the determinism check.

    A cell that raises a LabError yields one failed gate named after the cell;
    configuration errors propagate.
    """
    cells = [name for name in lab.config.checks if name != "determinism"]
    if cells:
        logger.info("Main map tail: beta_hat %.4f", lab.main.tail_model.beta_hat)

    def run_cell(name: str) -> List[GateResult]:
        try:
            return SUBCOMMANDS[name](lab)
        except ConfigError:
            raise
        except LabError as exc:
            logger.error("Cell %s failed: %s", name, exc.detail)
            return [_gate(f"{name} error", False, detail=exc.detail)]

    with ThreadPoolExecutor(max_workers=lab.threads) as pool:
        outcomes = list(pool.map(run_cell, cells))
    results = [gate for gates in outcomes for gate in gates]
    if "determinism" in lab.config.checks:
        results.extend(run_cell("determinism"))
    logger.info(
        "Acceptance: %d/%d gates pass on %d cells with %d threads",
        sum(g.passed for g in results),
        len(results),
        len(cells),
        lab.threads,
    )
    return results


def enforce_gates(gates: List[GateResult]) -> None:
    """
    Raise for the first failed gate.

    Raises:
        GateFailure: Naming the first failed gate; the detail lists every failure
    """
    failed = [g.name for g in gates if not g.passed]
    if failed:
        raise GateFailure(f"{len(failed)} of {len(gates)} gates failed: {', '.join(failed)}", gate=failed[0])
