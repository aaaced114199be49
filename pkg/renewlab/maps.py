"""
Interval Maps, Return Partitions and Skew Products

This module defines the LSV family f0(x) = x(1 + 2^a x^a) on [0, 1/2] with
affine branches on (1/2, 1], the first-return structure on Y = (1/2, 1], and
the invertible skew products f(x, y) = (f0(x), g(x, y)) built over them.
Cells are left-open and right-closed throughout.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from renewlab.errors import BranchInversionError, ConvergenceError, DomainError, TrapError
from renewlab.schemas import ConditionReport, CoverageReport, FiberConfig, MapConfig

logger = logging.getLogger(__name__)

RETURN_CAP = 10_000_000
NEWTON_TOL = 1e-13
EPS = float(np.finfo(float).eps)
LSV_RIGHT = (0.5, 1.0, 2.0, -1.0)
NONMARKOV_RIGHT = ((0.5, 0.8, 2.5, -1.25), (0.8, 1.0, 2.5, -1.7))


# ============================================================================
# Branches and Interval Maps
# ============================================================================


@dataclass(frozen=True)
class Branch:
    """
    Affine branch x -> slope * x + intercept on (lo, hi].

    Attributes:
        lo: Open left end of the domain
        hi: Closed right end of the domain
        slope: Nonzero derivative
        intercept: Value at x = 0
    """

    lo: float
    hi: float
    slope: float
    intercept: float

    def forward(self, x):
        return self.slope * x + self.intercept

    def derivative(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.slope)

    def inverse(self, y):
        return (y - self.intercept) / self.slope

    @property
    def image(self) -> Tuple[float, float]:
        a, b = self.forward(self.lo), self.forward(self.hi)
        return (min(a, b), max(a, b))


@dataclass(frozen=True)
class IntervalMapSpec:
    """
    Piecewise monotone map of [0, 1] with the LSV branch on [0, 1/2].

    Attributes:
        kind: "lsv", "nonmarkov" or "custom"
        alpha: Order of tangency at the neutral fixed point
        right_branches: Affine branches tiling (1/2, 1], sorted by domain
    """

    kind: str
    alpha: float
    right_branches: Tuple[Branch, ...]

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not self.right_branches:
            raise DomainError("at least one branch on (1/2, 1] is required")
        edge = 0.5
        for k, b in enumerate(self.right_branches):
            if not math.isclose(b.lo, edge, abs_tol=1e-15) or not b.hi > b.lo:
                raise DomainError(f"branch {k} domain ({b.lo}, {b.hi}] breaks the tiling of (1/2, 1]")
            if b.slope == 0:
                raise DomainError(f"branch {k} is not strictly monotone")
            ilo, ihi = b.image
            if ilo < -1e-12 or ihi > 1.0 + 1e-12:
                raise DomainError(f"branch {k} image ({ilo}, {ihi}] leaves [0, 1]")
            if self.kind == "nonmarkov" and not abs(b.slope) > 2.0:
                raise DomainError(f"non-Markov branch {k} needs |f0'| > 2, got {abs(b.slope)}")
            edge = b.hi
        if not math.isclose(edge, 1.0, abs_tol=1e-15):
            raise DomainError("branches on (1/2, 1] must end at 1")

    @property
    def beta(self) -> float:
        return 1.0 / self.alpha

    @property
    def markov(self) -> bool:
        return self.kind == "lsv"

    @property
    def branches(self) -> List[Tuple[Tuple[float, float], Callable, Callable]]:
        """All branches as (domain, forward, derivative), the LSV branch first."""
        left = ((0.0, 0.5), self._left, self._left_derivative)
        return [left] + [((b.lo, b.hi), b.forward, b.derivative) for b in self.right_branches]

    def _left(self, x):
        return x * (1.0 + (2.0 * x) ** self.alpha)

    def _left_derivative(self, x):
        return 1.0 + (1.0 + self.alpha) * (2.0 * x) ** self.alpha

    def step(self, x: float) -> float:
        """Scalar f0; the single arithmetic path used by every induced iteration."""
        if x <= 0.5:
            return x * (1.0 + (2.0 * x) ** self.alpha)
        for b in self.right_branches:
            if x <= b.hi:
                return b.slope * x + b.intercept
        return self.right_branches[-1].slope * x + self.right_branches[-1].intercept

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Vectorized f0."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        left = x <= 0.5
        xl = x[left]
        out[left] = xl * (1.0 + (2.0 * xl) ** self.alpha)
        for b in self.right_branches:
            mask = (x > b.lo) & (x <= b.hi)
            out[mask] = b.slope * x[mask] + b.intercept
        return out

    def derivative(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        left = x <= 0.5
        out[left] = self._left_derivative(x[left])
        for b in self.right_branches:
            mask = (x > b.lo) & (x <= b.hi)
            out[mask] = b.slope
        return out


def lsv(alpha: float) -> IntervalMapSpec:
    return IntervalMapSpec("lsv", alpha, (Branch(*LSV_RIGHT),))


def nonmarkov_default(alpha: float = 4.0 / 3.0) -> IntervalMapSpec:
    """Two slope-2.5 branches with images (0, 0.75] and (0.3, 0.8]."""
    return IntervalMapSpec("nonmarkov", alpha, tuple(Branch(*row) for row in NONMARKOV_RIGHT))


def map_spec_from_config(config: MapConfig) -> IntervalMapSpec:
    if config.kind == "lsv":
        return lsv(config.alpha)
    rows = config.branch_rows()
    if not rows:
        if config.kind == "nonmarkov":
            return nonmarkov_default(config.alpha)
        raise DomainError("custom maps need branch rows")
    return IntervalMapSpec(config.kind, config.alpha, tuple(Branch(*row) for row in rows))


def map_spec_to_config(spec: IntervalMapSpec, fiber: Optional[FiberConfig] = None) -> MapConfig:
    rows = []
    if spec.kind != "lsv":
        rows = [f"{b.lo!r} {b.hi!r} {b.slope!r} {b.intercept!r}" for b in spec.right_branches]
    return MapConfig(
        kind=spec.kind,  # type: ignore[arg-type]
        alpha=spec.alpha,
        branches=rows,
        fiber=fiber or FiberConfig(),
    )


def lsv_apply(x: float, alpha: float) -> float:
    """
    Evaluate the LSV map.

    Args:
        x: Point of [0, 1]
        alpha: Positive tangency order

    Returns:
        float: x(1 + 2^alpha x^alpha) on [0, 1/2], 2x - 1 on (1/2, 1]

    Raises:
        DomainError: If x is outside [0, 1] or alpha <= 0
    """
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x = {x} is outside [0, 1]")
    if x <= 0.5:
        return x * (1.0 + (2.0 * x) ** alpha)
    return 2.0 * x - 1.0


def left_branch_preimage(y: float, alpha: float, max_iter: int = 200) -> float:
    """
    Solve x(1 + 2^alpha x^alpha) = y for x in (0, 1/2].

    Safeguarded Newton iteration from the lower bound y / (1 + (2y)^alpha),
    falling back to bisection whenever a step leaves the current bracket.

    Raises:
        DomainError: If y is outside (0, 1]
        ConvergenceError: If the residual does not reach 1e-13 within max_iter steps
    """
    if not 0.0 < y <= 1.0:
        raise DomainError(f"y = {y} is outside (0, 1]")
    if y == 1.0:
        return 0.5
    lo, hi = 0.0, 0.5
    x = y / (1.0 + (2.0 * y) ** alpha)
    residual = math.inf
    for _ in range(max_iter):
        t = (2.0 * x) ** alpha
        residual = x * (1.0 + t) - y
        if residual == 0.0:
            return x
        if residual > 0:
            hi = x
        else:
            lo = x
        x_new = x - residual / (1.0 + (1.0 + alpha) * t)
        if not lo <= x_new <= hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 4.0 * EPS * x_new:
            final = abs(x_new * (1.0 + (2.0 * x_new) ** alpha) - y)
            if final <= NEWTON_TOL:
                return x_new
            raise ConvergenceError(
                f"left preimage of {y!r} stalled with residual {final:.3e}", last_residual=final
            )
        x = x_new
    raise ConvergenceError(
        f"left preimage of {y!r} did not converge in {max_iter} steps", last_residual=abs(residual)
    )


def left_preimage_array(y: np.ndarray, alpha: float, max_iter: int = 80) -> np.ndarray:
    """Vectorized left-branch inverse; Newton from the right is monotone for the convex branch."""
    y = np.asarray(y, dtype=float)
    x = y / (1.0 + (2.0 * y) ** alpha)
    for _ in range(max_iter):
        t = (2.0 * x) ** alpha
        step = (x * (1.0 + t) - y) / (1.0 + (1.0 + alpha) * t)
        x_new = np.clip(x - step, 0.0, 0.5)
        done = np.all(np.abs(x_new - x) <= 4.0 * EPS * np.maximum(x_new, 1e-300))
        x = x_new
        if done:
            break
    residual = np.abs(x * (1.0 + (2.0 * x) ** alpha) - y)
    worst = float(residual.max(initial=0.0))
    if worst > NEWTON_TOL:
        raise ConvergenceError(f"vectorized left preimage residual {worst:.3e}", last_residual=worst)
    x[y >= 1.0] = 0.5
    return x


# ============================================================================
# Return Partition
# ============================================================================


@dataclass
class ReturnPartition:
    """
    Level sets Y_n = {phi = n} of the return time to Y = (1/2, 1].

    Attributes:
        z: Boundary sequence, z[0] = 1, z[1] = 1/2, z[k+1] = L^-1(z[k])
        cell_n: Return time of each cell (cells sorted by left end)
        cell_lo: Open left ends
        cell_hi: Closed right ends
        cell_branch: Index of the right branch the cell lies in
        masses: masses[n] = mu(Y_n), masses[0] = 0; zero until filled by tails
        cell_mass: mu of each cell (same order as cell_n); None until filled by tails
        truncated_mass: Mass of the uncovered set {phi > n_max}
        gaps: Uncovered subintervals of Y
    """

    alpha: float
    n_max: int
    z: np.ndarray
    cell_n: np.ndarray
    cell_lo: np.ndarray
    cell_hi: np.ndarray
    cell_branch: np.ndarray
    masses: np.ndarray
    truncated_mass: float = 0.0
    gaps: List[Tuple[float, float]] = field(default_factory=list)
    markov: bool = True
    low_coverage: bool = False
    cell_mass: Optional[np.ndarray] = None

    @classmethod
    def from_masses(cls, masses: Sequence[float], truncated_mass: float = 0.0, alpha: float = 1.0):
        """Synthetic partition carrying only return-time masses (masses[0] must be 0)."""
        p = np.asarray(masses, dtype=float).copy()
        if p.ndim != 1 or p.size < 2 or p[0] != 0.0:
            raise DomainError("masses must be indexed by return time with masses[0] = 0")
        empty_f = np.zeros(0)
        return cls(
            alpha=alpha,
            n_max=p.size - 1,
            z=np.zeros(0),
            cell_n=np.zeros(0, dtype=np.int64),
            cell_lo=empty_f,
            cell_hi=empty_f,
            cell_branch=np.zeros(0, dtype=np.int64),
            masses=p,
            truncated_mass=float(truncated_mass),
            markov=False,
        )

    @property
    def beta(self) -> float:
        return 1.0 / self.alpha

    @property
    def lengths(self) -> np.ndarray:
        return self.cell_hi - self.cell_lo

    @property
    def uncovered_length(self) -> float:
        return float(sum(b - a for a, b in self.gaps))

    def lebesgue_by_level(self) -> np.ndarray:
        """|Y_n| for n = 0..n_max."""
        return np.bincount(self.cell_n, weights=self.lengths, minlength=self.n_max + 1)

    def locate(self, x: np.ndarray) -> np.ndarray:
        """Return time of the cell containing each x; 0 inside a gap."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.cell_hi, x, side="left")
        idx = np.clip(idx, 0, self.cell_hi.size - 1)
        inside = (x > self.cell_lo[idx]) & (x <= self.cell_hi[idx])
        return np.where(inside, self.cell_n[idx], 0)

    def tails(self) -> np.ndarray:
        """tails[n] = mu(phi > n) for n = 0..n_max, truncated mass included."""
        rev = np.cumsum(self.masses[::-1])[::-1]
        out = np.empty(self.n_max + 1)
        out[:-1] = rev[1:]
        out[-1] = 0.0
        return out + self.truncated_mass

    def tail(self, n: int) -> float:
        return float(self.tails()[n])

    def renewal_masses(self) -> np.ndarray:
        """Return-time probabilities with the truncated mass in an overflow bucket at n_max + 1."""
        return np.concatenate([self.masses, [self.truncated_mass]])

    def with_masses(
        self, masses: np.ndarray, truncated_mass: float, cell_mass: Optional[np.ndarray] = None
    ) -> "ReturnPartition":
        return replace(
            self,
            masses=np.asarray(masses, dtype=float),
            truncated_mass=float(truncated_mass),
            cell_mass=None if cell_mass is None else np.asarray(cell_mass, dtype=float),
        )


def _boundary_sequence(alpha: float, n_max: int) -> np.ndarray:
    z = np.empty(n_max + 1)
    z[0], z[1] = 1.0, 0.5
    for k in range(1, n_max):
        z[k + 1] = left_branch_preimage(z[k], alpha)
    return z


def _uncovered(lo: np.ndarray, hi: np.ndarray, tol: float = 1e-15) -> List[Tuple[float, float]]:
    gaps = []
    edge = 0.5
    for a, b in zip(lo, hi):
        if a > edge + tol:
            gaps.append((edge, float(a)))
        edge = max(edge, float(b))
    if edge < 1.0 - tol:
        gaps.append((edge, 1.0))
    return gaps


def build_return_partition(spec: IntervalMapSpec, n_max: int) -> ReturnPartition:
    """
    Build the return-time cells of Y up to depth n_max.

    Cells of each right branch b are the preimages b^-1((1/2, 1] & image) for
    phi = 1 and b^-1((z_n, z_{n-1}] & image) for phi = n >= 2, so the LSV case
    gives Y_1 = (3/4, 1] and Y_n = ((z_n + 1)/2, (z_{n-1} + 1)/2].

    Args:
        spec: Interval map
        n_max: Deepest return time resolved (>= 2)

    Returns:
        ReturnPartition: Cells sorted by left end, masses left at zero

    Raises:
        DomainError: If n_max < 2
        BranchInversionError: If an inverted endpoint leaves its branch domain
    """
    if n_max < 2:
        raise DomainError(f"n_max must be at least 2, got {n_max}")
    z = _boundary_sequence(spec.alpha, n_max)
    upper = np.concatenate([[1.0], z[1:-1]])
    lower = np.concatenate([[0.5], z[2:]])
    levels = np.arange(1, n_max + 1)

    ns, los, his, brs = [], [], [], []
    for k, b in enumerate(spec.right_branches):
        ilo, ihi = b.image
        a = np.maximum(lower, ilo)
        c = np.minimum(upper, ihi)
        keep = c > a
        pa, pc = b.inverse(a[keep]), b.inverse(c[keep])
        lo, hi = np.minimum(pa, pc), np.maximum(pa, pc)
        bad = (lo < b.lo - 1e-12) | (hi > b.hi + 1e-12)
        if np.any(bad):
            raise BranchInversionError(f"branch {k} endpoint inversion left its domain", branch=k)
        ns.append(levels[keep])
        los.append(np.clip(lo, b.lo, b.hi))
        his.append(np.clip(hi, b.lo, b.hi))
        brs.append(np.full(int(keep.sum()), k))

    cell_lo = np.concatenate(los)
    order = np.argsort(cell_lo, kind="stable")
    partition = ReturnPartition(
        alpha=spec.alpha,
        n_max=n_max,
        z=z,
        cell_n=np.concatenate(ns)[order].astype(np.int64),
        cell_lo=cell_lo[order],
        cell_hi=np.concatenate(his)[order],
        cell_branch=np.concatenate(brs)[order].astype(np.int64),
        masses=np.zeros(n_max + 1),
        markov=spec.markov,
    )
    partition.gaps = _uncovered(partition.cell_lo, partition.cell_hi)
    coverage = float(partition.lengths.sum()) / 0.5
    partition.low_coverage = coverage < 0.99
    if partition.low_coverage:
        logger.warning("Partition covers %.2f%% of Y; increase n_max beyond %d", 100 * coverage, n_max)
    logger.info("Built %d return cells up to n_max=%d (coverage %.6f)", partition.cell_n.size, n_max, coverage)
    return partition


def coverage_check(
    spec: IntervalMapSpec, depth: int = 12, bins: int = 512, points: int = 4096, threshold: float = 0.99
) -> CoverageReport:
    """
    Histogram coverage of Y by iterated images of each right branch.

    A stand-in for topological mixing: every branch's iterates should visit
    every bin of (1/2, 1] within `depth` raw steps.
    """
    coverage = []
    for b in spec.right_branches:
        x = np.linspace(b.lo, b.hi, points + 2)[1:-1]
        hit = np.zeros(bins, dtype=bool)
        for _ in range(depth):
            x = spec.apply(x)
            inside = x[x > 0.5]
            idx = np.clip(np.ceil((inside - 0.5) * 2 * bins).astype(np.int64) - 1, 0, bins - 1)
            hit[idx] = True
        coverage.append(float(hit.mean()))
    return CoverageReport(
        depth=depth,
        bins=bins,
        coverage=coverage,
        threshold=threshold,
        passed=bool(min(coverage) >= threshold),
    )


def induced_apply(spec: IntervalMapSpec, x: float, cap: int = RETURN_CAP) -> Tuple[float, int]:
    """
    First-return map F0 on Y.

    Returns:
        Tuple of (F0(x), phi0(x))

    Raises:
        DomainError: If x is outside (1/2, 1]
        TrapError: If no return happens within cap raw steps
    """
    if not 0.5 < x <= 1.0:
        raise DomainError(f"x = {x} is outside Y = (1/2, 1]")
    y = spec.step(x)
    n = 1
    while y <= 0.5:
        if y == 0.0 or n >= cap:
            raise TrapError(f"orbit of {x!r} trapped near the neutral fixed point", point=x, steps=n)
        y = spec.step(y)
        n += 1
    return y, n


def induced_derivative(spec: IntervalMapSpec, x: np.ndarray, cap: int = RETURN_CAP):
    """
    Vectorized first return with chain-rule derivative.

    Returns:
        Tuple of (F0(x), phi0(x), F0'(x)) arrays
    """
    x = np.asarray(x, dtype=float)
    image = np.empty_like(x)
    phi = np.zeros(x.shape, dtype=np.int64)
    deriv = np.empty_like(x)
    active = np.arange(x.size)
    cur = x.copy()
    d = np.ones_like(x)
    n = 0
    while active.size:
        d = d * spec.derivative(cur)
        cur = spec.apply(cur)
        n += 1
        done = cur > 0.5
        image[active[done]] = cur[done]
        phi[active[done]] = n
        deriv[active[done]] = d[done]
        active, cur, d = active[~done], cur[~done], d[~done]
        if active.size and (n >= cap or np.any(cur == 0.0)):
            raise TrapError("vectorized return iteration trapped", point=float(x[active[0]]), steps=n)
    return image, phi, deriv


# ============================================================================
# Skew Products
# ============================================================================


@dataclass(frozen=True)
class SkewProduct:
    """
    Invertible skew product f(x, y) = (f0(x), g(x, y)) over an interval map.

    Attributes:
        base: The interval map f0
        fiber: g(x, y), vectorized
        fiber_dx: dg/dx
        fiber_dy: dg/dy
        sigma: Lower bound on |dg/dy|
        lambda_inv: Certified bound on |dG/dy| for the induced map
        k0: Cone constant bound on |dG/dx| / |F0'|
        contraction: Fiber contraction c for the affine family
        extra_bound: Configured constant for the non-Markov condition
    """

    base: IntervalMapSpec
    fiber: Callable
    fiber_dx: Callable
    fiber_dy: Callable
    sigma: float
    lambda_inv: float
    k0: float = 1.0
    contraction: Optional[float] = None
    extra_bound: float = 10.0

    def __post_init__(self) -> None:
        xs = np.linspace(0.0, 1.0, 65)
        ys = np.linspace(0.0, 1.0, 65)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        dy = np.abs(self.fiber_dy(gx, gy))
        if np.any(dy < self.sigma - 1e-15) or np.any(dy > 1.0 + 1e-15) or not self.sigma > 0:
            raise DomainError("fiber derivative violates 0 < sigma <= |dg/dy| <= 1")
        if not 0.0 < self.lambda_inv < 1.0:
            raise DomainError(f"lambda_inv must lie in (0, 1), got {self.lambda_inv}")
        values = self.fiber(gx, gy)
        steps = np.diff(values, axis=1)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise DomainError("fiber map is not injective on sampled vertical segments")
        if self.base.markov:
            left, right = values[xs < 0.5], values[xs > 0.5]
            if left.min() < -1e-15 or left.max() > 0.5 + 1e-15:
                raise DomainError("Markov fiber must map x < 1/2 fibers into [0, 1/2]")
            if right.min() < 0.5 - 1e-15 or right.max() > 1.0 + 1e-15:
                raise DomainError("Markov fiber must map x > 1/2 fibers into [1/2, 1]")

    def step(self, x: float, y: float) -> Tuple[float, float]:
        return self.base.step(x), float(self.fiber(x, y))

    def apply(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self.base.apply(x), self.fiber(x, y)


def affine_fiber(c: float) -> Tuple[Callable, Callable, Callable]:
    """g(x, y) = c y + (1 - 2c) x + c [x > 1/2] with its partials."""
    if not 0.0 < c <= 0.5:
        raise DomainError(f"fiber contraction must lie in (0, 1/2], got {c}")

    def g(x, y):
        return c * y + (1.0 - 2.0 * c) * x + c * (np.asarray(x) > 0.5)

    def gx(x, y):
        return np.full(np.broadcast(x, y).shape, 1.0 - 2.0 * c)

    def gy(x, y):
        return np.full(np.broadcast(x, y).shape, c)

    return g, gx, gy


def default_skew(base: IntervalMapSpec, c: float = 0.5, extra_bound: float = 10.0) -> SkewProduct:
    g, gx, gy = affine_fiber(c)
    return SkewProduct(
        base=base,
        fiber=g,
        fiber_dx=gx,
        fiber_dy=gy,
        sigma=c,
        lambda_inv=c,
        k0=1.0,
        contraction=c,
        extra_bound=extra_bound,
    )


def skew_from_config(config: MapConfig) -> SkewProduct:
    return default_skew(map_spec_from_config(config), config.fiber.c)


def skew_induced_apply(
    sp: SkewProduct, p: Tuple[float, float], cap: int = RETURN_CAP
) -> Tuple[Tuple[float, float], int]:
    """
    First-return map F(x, y) = (F0(x), G(x, y)) of the skew product.

    The base coordinate follows the same scalar path as induced_apply.
    """
    x, y = p
    if not 0.5 < x <= 1.0 or not 0.0 <= y <= 1.0:
        raise DomainError(f"point {p} is outside Y = (1/2, 1] x [0, 1]")
    x0 = x
    n = 0
    while True:
        y = float(sp.fiber(x, y))
        x = sp.base.step(x)
        n += 1
        if x > 0.5:
            return (x, y), n
        if x == 0.0 or n >= cap:
            raise TrapError(f"orbit of {x0!r} trapped near the neutral fixed point", point=x0, steps=n)


def check_hyperbolicity(sp: SkewProduct, sample_count: int, seed: int) -> ConditionReport:
    """
    Sample the stable-contraction, cone and non-Markov conditions on Y.

    Derivatives of the return map are accumulated along each return orbit:
    dX/dx, dY/dx and dY/dy of the raw iterates.
    """
    if sample_count < 1000:
        raise DomainError(f"sample_count must be at least 1000, got {sample_count}")
    rng = np.random.default_rng(seed)
    x = 0.5 + 0.5 * (1.0 - rng.random(sample_count))
    y = rng.random(sample_count)

    stable = np.empty(sample_count)
    cone = np.empty(sample_count)
    extra = np.empty(sample_count)
    active = np.arange(sample_count)
    a = np.ones(sample_count)
    b = np.zeros(sample_count)
    d = np.ones(sample_count)
    n = 0
    while active.size:
        gx = sp.fiber_dx(x, y)
        gy = sp.fiber_dy(x, y)
        b = gx * a + gy * b
        d = gy * d
        a = sp.base.derivative(x) * a
        y = sp.fiber(x, y)
        x = sp.base.apply(x)
        n += 1
        done = x > 0.5
        idx = active[done]
        stable[idx] = np.abs(d[done])
        cone[idx] = np.abs(b[done]) / np.abs(a[done])
        extra[idx] = np.abs(d[done]) * n * np.abs(a[done])
        keep = ~done
        active, x, y, a, b, d = active[keep], x[keep], y[keep], a[keep], b[keep], d[keep]
        if active.size and (n >= RETURN_CAP or np.any(x == 0.0)):
            raise TrapError("hyperbolicity sampling trapped", steps=n)

    stable_max = float(stable.max())
    cone_max = float(cone.max())
    report = ConditionReport(
        sample_count=sample_count,
        seed=seed,
        markov=sp.base.markov,
        stable_max=stable_max,
        stable_bound=sp.lambda_inv,
        stable_pass=bool(stable_max <= sp.lambda_inv + 1e-15 and stable_max < 1.0),
        cone_max=cone_max,
        cone_bound=sp.k0,
        cone_pass=bool(cone_max <= sp.k0),
    )
    if not sp.base.markov:
        extra_max = float(extra.max())
        report.extra_max = extra_max
        report.extra_bound = sp.extra_bound
        report.extra_pass = bool(extra_max <= sp.extra_bound)
    if not report.passed:
        logger.warning("Hyperbolicity conditions violated: %s", report.model_dump())
    return report
