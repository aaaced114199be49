"""
Pydantic Schemas for renewlab

This module defines the experiment configuration file format and every report
record the laboratory produces. Configuration is parsed from JSON text and
validated here; reports are plain records that the storage layer writes as
summary lines and CSV rows.
"""

import json
import math
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, computed_field, field_validator

from renewlab.errors import ConfigError

CHECK_NAMES = ("tails", "spectrum", "renewal", "mix", "rates", "norms", "determinism")

# ============================================================================
# Experiment Configuration
# ============================================================================


class FiberConfig(BaseModel):
    """
    Fiber map of a skew product.

    Attributes:
        kind: "default" for g(x,y) = (y + [x>1/2])/2, "affine" for the
            contraction-c family g(x,y) = c*y + (1-2c)*x + c*[x>1/2]
        contraction: Fiber contraction c, used by the affine kind
    """

    model_config = ConfigDict(extra="forbid")

    kind: Literal["default", "affine"] = Field(default="default", description="Fiber family")
    contraction: float = Field(
        default=0.5, gt=0.0, le=0.5, description="Fiber contraction factor c"
    )

    @property
    def c(self) -> float:
        return 0.5 if self.kind == "default" else self.contraction


class MapConfig(BaseModel):
    """
    Text form of an interval map specification.

    Branch rows are strings "lo hi slope intercept" describing the affine
    branches on (1/2, 1]; the branch on [0, 1/2] is always the LSV branch.
    """

    model_config = ConfigDict(extra="forbid")

    kind: Literal["lsv", "nonmarkov", "custom"] = Field(default="lsv", description="Map family")
    alpha: float = Field(default=4.0 / 3.0, gt=0.0, description="Neutral fixed point order")
    branches: List[str] = Field(
        default_factory=list, description='Affine branch rows "lo hi slope intercept"'
    )
    fiber: FiberConfig = Field(default_factory=FiberConfig, description="Fiber map")

    @field_validator("branches")
    @classmethod
    def _rows_have_four_numbers(cls, rows: List[str]) -> List[str]:
        for row in rows:
            fields = row.split()
            if len(fields) != 4:
                raise ValueError(f"branch row {row!r} must hold 4 numbers")
            for text in fields:
                float(text)
        return rows

    @computed_field  # type: ignore[misc]
    @property
    def beta(self) -> float:
        return 1.0 / self.alpha

    def branch_rows(self) -> List[Tuple[float, float, float, float]]:
        return [tuple(float(t) for t in row.split()) for row in self.branches]  # type: ignore[misc]


class ExperimentConfig(BaseModel):
    """
    Complete description of one laboratory run.

    The main map drives tails, spectrum, renewal, rates and norms; the finite
    map (alpha < 1) and the non-Markov map are the extra cells of the mixing
    experiment. Sizes default to the desk-scale acceptance suite.
    """

    model_config = ConfigDict(extra="forbid")

    map: MapConfig = Field(default_factory=MapConfig, description="Main map")
    finite_map: MapConfig = Field(
        default_factory=lambda: MapConfig(kind="lsv", alpha=0.5),
        description="Finite-measure map for the decay experiment",
    )
    nonmarkov_map: MapConfig = Field(
        default_factory=lambda: MapConfig(
            kind="nonmarkov", branches=["0.5 0.8 2.5 -1.25", "0.8 1.0 2.5 -1.7"]
        ),
        description="Non-Markov map for the first-order mixing experiment",
    )

    # Discretization sizes
    grid_size: int = Field(default=2048, ge=2, description="Ulam grid cells M")
    spectrum_grid_size: int = Field(default=4096, ge=2, description="Ulam M for spectra")
    grid_x: int = Field(default=256, ge=2, description="Leaf grid points in x")
    grid_y: int = Field(default=256, ge=64, description="Leaf grid points in y")
    horizon: int = Field(default=2000, ge=1, description="Renewal horizon N")
    n_max: int = Field(default=100_000, ge=2, description="Return-time truncation N_max")
    exact_levels: int = Field(default=2000, ge=1, description="Slices stored exactly")
    tail_window: Tuple[int, int] = Field(default=(100, 10_000), description="Tail fit window")

    # Spectral sweep
    u_min: float = Field(default=1e-4, gt=0.0, description="Smallest u in z = exp(-u)")
    u_max: float = Field(default=1e-2, gt=0.0, description="Largest u in z = exp(-u)")
    u_count: int = Field(default=9, ge=3, description="Number of u values")

    # Synthetic scalar renewal
    synthetic_beta: float = Field(default=0.6, gt=0.0, lt=1.0, description="Synthetic tail index")
    synthetic_horizon: int = Field(default=100_000, ge=10, description="Synthetic horizon N")
    rates_horizon: int = Field(default=10_000, ge=10, description="Operator horizon of the expansion fit")

    # Monte Carlo
    lags: Optional[List[int]] = Field(default=None, description="Explicit lag list")
    lag_min: int = Field(default=50, ge=0, description="Smallest lag")
    lag_max: int = Field(default=800, ge=1, description="Largest lag")
    lags_per_decade: int = Field(default=24, ge=1, description="Log-spaced lag density")
    finite_lag_min: int = Field(default=20, ge=1, description="Smallest finite-case lag")
    finite_lag_max: int = Field(default=500, ge=2, description="Largest finite-case lag")
    samples: int = Field(default=10_000_000, ge=1, description="Monte Carlo samples")
    seed: int = Field(default=20240607, ge=0, lt=2**64, description="Master seed (u64)")

    # Norm audit
    norm_q: float = Field(default=0.5, gt=0.0, lt=1.0, description="Strong-stable exponent q")
    basis_size: int = Field(default=37, ge=8, description="Test functions per norm")
    audit_samples: int = Field(default=20, ge=1, description="Mixed test functions")
    audit_powers: List[int] = Field(default=[1, 2, 3, 4, 5, 6], description="Powers n of R")

    # Execution
    threads: Optional[int] = Field(default=None, ge=1, description="Worker threads")
    output_dir: Optional[Path] = Field(default=None, description="Run directory")
    checks: List[str] = Field(default_factory=lambda: list(CHECK_NAMES), description="Gates")
    gate_slack: Optional[float] = Field(default=None, gt=0.0, description="Tolerance multiplier")

    @field_validator("checks")
    @classmethod
    def _known_checks(cls, checks: List[str]) -> List[str]:
        unknown = sorted(set(checks) - set(CHECK_NAMES))
        if unknown:
            raise ValueError(f"unknown checks {unknown}; choose from {list(CHECK_NAMES)}")
        return checks

    @field_validator("tail_window")
    @classmethod
    def _window_ratio(cls, window: Tuple[int, int]) -> Tuple[int, int]:
        lo, hi = window
        if lo < 1 or hi < 10 * lo:
            raise ValueError("tail_window needs 1 <= lo and hi >= 10*lo")
        return window

    @field_validator("lags")
    @classmethod
    def _positive_lags(cls, lags: Optional[List[int]]) -> Optional[List[int]]:
        if lags is not None and (not lags or min(lags) < 0):
            raise ValueError("lags must be a nonempty list of nonnegative integers")
        return lags

    @computed_field  # type: ignore[misc]
    @property
    def beta(self) -> float:
        return 1.0 / self.map.alpha

    def lag_grid(self, lo: Optional[int] = None, hi: Optional[int] = None) -> List[int]:
        """Log-spaced integer lags (or the explicit list when given)."""
        if self.lags is not None and lo is None and hi is None:
            return sorted(set(self.lags))
        lo = self.lag_min if lo is None else lo
        hi = self.lag_max if hi is None else hi
        start = max(lo, 1)
        count = max(2, int(math.ceil(self.lags_per_decade * math.log10(hi / start))) + 1)
        grid = {int(round(start * (hi / start) ** (k / (count - 1)))) for k in range(count)}
        if lo == 0:
            grid.add(0)
        return sorted(grid)

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        """
        Parse and validate configuration text.

        Args:
            text: JSON document

        Returns:
            ExperimentConfig: The validated configuration

        Raises:
            ConfigError: If the text is not valid JSON or fails validation
        """
        try:
            return cls.model_validate_json(text)
        except ValidationError as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc

    @classmethod
    def load(cls, path: Path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
        return cls.parse(text)

    def dump_canonical(self) -> str:
        """Serialize to sorted-key, 2-space indented JSON (computed fields excluded)."""
        data = self.model_dump(mode="json", exclude={"beta"})
        for key in ("map", "finite_map", "nonmarkov_map"):
            data[key].pop("beta", None)
        return json.dumps(data, sort_keys=True, indent=2) + "\n"

    def with_overrides(self, **updates) -> "ExperimentConfig":
        """
        Copy with top-level fields replaced; None values are ignored.

        Raises:
            ConfigError: If an override fails validation
        """
        data = json.loads(self.dump_canonical())
        data.update({k: (str(v) if isinstance(v, Path) else v) for k, v in updates.items() if v is not None})
        try:
            return type(self).model_validate(data)
        except ValidationError as exc:
            raise ConfigError(f"invalid override: {exc}") from exc


# ============================================================================
# Report Records
# ============================================================================


class ConditionReport(BaseModel):
    """Empirical hyperbolicity conditions of a skew product along return orbits."""

    sample_count: int
    seed: int
    markov: bool
    stable_max: float = Field(..., description="max |dG/dy| over samples")
    stable_bound: float
    stable_pass: bool
    cone_max: float = Field(..., description="max |dG/dx| / |F0'| over samples")
    cone_bound: float
    cone_pass: bool
    extra_max: Optional[float] = Field(
        default=None, description="max |dG/dy| * phi * |F0'| (non-Markov maps only)"
    )
    extra_bound: Optional[float] = None
    extra_pass: Optional[bool] = None

    @property
    def passed(self) -> bool:
        return self.stable_pass and self.cone_pass and self.extra_pass is not False


class CoverageReport(BaseModel):
    """Empirical stand-in for topological mixing; not a proof."""

    depth: int
    bins: int
    coverage: List[float] = Field(..., description="Covered fraction per branch")
    threshold: float
    passed: bool
    caveat: str = "empirical histogram coverage, not a proof of topological mixing"


class TailModel(BaseModel):
    """
    Fitted tail law mu(phi > n) ~ c_hat * n^(-beta_hat).

    Attributes:
        ell_n: Sample points of the slowly varying profile
        ell_profile: n^beta_hat * mu(phi > n) at ell_n
        residual_exponent: Fitted order of |tail - c_hat n^(-beta_hat)|
    """

    beta_hat: float = Field(..., gt=0.0)
    beta_stderr: float
    c_hat: float = Field(..., gt=0.0)
    ell_n: List[int]
    ell_profile: List[float]
    residual_exponent: float
    residual_stderr: float
    fit_window: Tuple[int, int]

    @field_validator("ell_profile")
    @classmethod
    def _positive_profile(cls, values: List[float]) -> List[float]:
        if any(v <= 0 for v in values):
            raise ValueError("ell profile entries must be positive")
        return values


class TruncationReport(BaseModel):
    n_max: int
    n_half: int
    beta_full: float
    beta_half: float
    c_full: float
    c_half: float

    @property
    def beta_shift(self) -> float:
        return abs(self.beta_full - self.beta_half)


class SpectralSummary(BaseModel):
    """One-line record of a leading eigenvalue computation."""

    z_real: float
    z_imag: float
    lambda_real: float
    lambda_imag: float
    gap: float
    residual: float


class ProjectionReport(BaseModel):
    trials: int
    iterations: int
    gap: float
    fitted_c: float
    fixed_point_error: float
    worst_holdout_ratio: float
    passed: bool


class EigenAsymptoticReport(BaseModel):
    us: List[float]
    one_minus_lambda: List[float]
    slope: float
    slope_stderr: float
    beta: float
    prefactor: float = Field(..., description="(1 - lambda)/u^beta at the reference u")
    prefactor_target: float = Field(..., description="Gamma(1 - beta) * c_hat")
    reference_u: float

    @property
    def prefactor_error(self) -> float:
        return abs(self.prefactor / self.prefactor_target - 1.0)


class RefinementReport(BaseModel):
    m_coarse: int
    m_fine: int
    u: float
    lambda_coarse: float
    lambda_fine: float
    tolerance: float

    @property
    def difference(self) -> float:
        return abs(self.lambda_fine - self.lambda_coarse)

    @property
    def passed(self) -> bool:
        return self.difference < self.tolerance


class SliceDecayReport(BaseModel):
    """Decay of return-time slice masses against n."""

    window: Tuple[int, int]
    slope: float = Field(..., description="log-log slope of the Lebesgue mass of slices")
    slope_stderr: float
    column_slope: float = Field(..., description="log-log slope of max column sums")
    identity_error: float = Field(..., description="max |sum of slices + overflow - R|")


class FirstOrderReport(BaseModel):
    target: float = Field(..., description="d0 <w, P v>")
    window: Tuple[int, int]
    max_rel_error: float
    last_rel_error: float
    trend_slope: float = Field(..., description="log-log slope of the relative error")
    decreasing: bool
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance and self.decreasing


class HigherOrderFit(BaseModel):
    beta: float
    q: int
    d_fit: List[float]
    d_stderr: List[float]
    d0_closed_form: float
    d0_rel_error: float
    residual_exponent: float
    residual_stderr: float
    window: Tuple[int, int]
    condition_number: float


class CesaroReport(BaseModel):
    beta: float
    expected_slope: float
    slope: float
    prefactor_ratio: Optional[float] = None
    slope_tolerance: float
    prefactor_tolerance: float

    @property
    def passed(self) -> bool:
        slope_ok = abs(self.slope - self.expected_slope) <= self.slope_tolerance
        if self.prefactor_ratio is None:
            return slope_ok
        return slope_ok and abs(self.prefactor_ratio - 1.0) <= self.prefactor_tolerance


class FiniteRenewalReport(BaseModel):
    mean_return_time: float
    window: Tuple[int, int]
    ratios: List[float] = Field(..., description="(u_n - 1/m) / ((1/m^2) sum_{k>n} mu(phi>k))")
    last_ratio: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.last_ratio - 1.0) <= self.tolerance


class MixingReport(BaseModel):
    beta: float
    q: int
    iv: float
    iw: float
    signal_lags: int
    inconclusive: bool
    d_fit: List[float] = Field(..., description="Fitted coefficients of c_hat * corr(n)")
    d_stderr: List[float]
    target: float = Field(..., description="d0 * Iv * Iw")
    d0_rel_error: Optional[float] = None
    consistent_with_zero: Optional[bool] = None
    max_first_order_deviation: Optional[float] = None
    chi2_per_dof: Optional[float] = None
    tolerance: float

    @property
    def passed(self) -> bool:
        if self.inconclusive:
            return False
        if self.d0_rel_error is None:
            return bool(self.consistent_with_zero)
        return self.d0_rel_error <= self.tolerance


class QuotientReport(BaseModel):
    lags: List[int]
    z_scores: List[float]
    max_z: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.max_z <= self.threshold


class FiniteDecayReport(BaseModel):
    beta: float
    mu_y: float = Field(..., description="Kac normalisation mu(Y) = 1/E[phi]")
    signal_lags: int
    inconclusive: bool
    slope: float
    slope_stderr: float
    expected_slope: float
    c0_fit: float
    c0_tail: float
    slope_tolerance: float
    prefactor_tolerance: float

    @property
    def passed(self) -> bool:
        if self.inconclusive:
            return False
        slope_ok = abs(self.slope - self.expected_slope) <= self.slope_tolerance
        return slope_ok and abs(self.c0_fit / self.c0_tail - 1.0) <= self.prefactor_tolerance


class ContractionReport(BaseModel):
    samples: int
    steps: int
    max_ratio: float = Field(..., description="max |dy_n| / (|dy_0| 2^-returns)")

    @property
    def passed(self) -> bool:
        return self.max_ratio <= 1.0 + 1e-12


class NormEstimate(BaseModel):
    """
    Lower-bound estimates of the anisotropic norms of a leaf function.

    Attributes:
        weak: sup over leaves and C^1 unit-ball tests of |leaf integral|
        strong_stable: the same sup over C^q unit-ball tests
        unstable: sup of leaf-integral difference quotients with C^1 tests
        basis_size: Number of test functions used
    """

    weak: float = Field(..., ge=0.0)
    strong_stable: float = Field(..., ge=0.0)
    unstable: float = Field(..., ge=0.0)
    q: float
    basis_size: int
    caveat: str = "estimates are lower bounds of suprema"

    @property
    def strong(self) -> float:
        return self.strong_stable + self.unstable


class AuditRecord(BaseModel):
    h_id: str
    n: int
    strong: float
    weak: float
    rhs: float
    passed: bool
    calibration: bool


class LYAuditReport(BaseModel):
    q: float
    lam: float
    fitted_c: float
    slack: float
    records: List[AuditRecord]
    excess_ratio: Optional[float] = Field(
        default=None, description="median decay ratio of the strong-norm excess"
    )
    contraction_visible: bool
    basis_stability: float = Field(..., description="max relative change under basis doubling")
    caveat: str = "estimated suprema make this a consistency check, not a proof"

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)


class NormDecayReport(BaseModel):
    """Strong-norm decay of the level-n pieces of the 2D transfer operator."""

    levels: List[int]
    strong: List[float]
    slope: float
    slope_stderr: float
    expected_slope: float = Field(..., description="-(1 + beta)")
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.slope - self.expected_slope) <= self.tolerance


class DistortionReport(BaseModel):
    levels: List[int]
    bounds: List[float] = Field(..., description="max |F'(x)/F'(x') - 1| / |x - x'| per branch")
    image_bounds: List[float] = Field(
        ..., description="max |log F'(x) - log F'(x')| / |F x - F x'| per branch"
    )
    refinement_change: float

    @property
    def passed(self) -> bool:
        return all(math.isfinite(b) for b in self.bounds) and self.refinement_change < 0.1


class GateResult(BaseModel):
    """Outcome of one acceptance gate."""

    name: str
    passed: bool
    value: Optional[float] = None
    tolerance: Optional[float] = None
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = [f"{self.name}: {status}"]
        if self.value is not None:
            parts.append(f"value={self.value:.6g}")
        if self.tolerance is not None:
            parts.append(f"tol={self.tolerance:.6g}")
        if self.detail:
            parts.append(self.detail)
        return " ".join(parts)
