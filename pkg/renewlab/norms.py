"""
Anisotropic Norms on Vertical Leaves

Functions on Y = (1/2, 1] x [0, 1] are tabulated on a uniform grid and paired
with smooth test functions along the vertical leaves {x} x [0, 1]. The weak
norm uses C^1 tests, the strong stable norm C^q tests and the unstable norm
compares leaf integrals of neighbouring leaves. Suprema are taken over a finite
nested test family, so every estimate is a lower bound.

The 2D transfer operator of the induced skew product is discretized by a
conservative remap: each level n maps a source leaf onto a strip of height c^n
and the strip mass is spread over the dual y-cells of the target grid.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import legendre
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import RegularGridInterpolator

from renewlab.errors import DomainError
from renewlab.fitting import log_grid, loglog_fit
from renewlab.maps import (
    IntervalMapSpec,
    ReturnPartition,
    SkewProduct,
    induced_derivative,
    left_preimage_array,
)
from renewlab.schemas import (
    AuditRecord,
    DistortionReport,
    LYAuditReport,
    NormDecayReport,
    NormEstimate,
)

logger = logging.getLogger(__name__)

MAX_LEVELS = 20_000
MIN_LEAF_POINTS = 64
PAIR_GRID = 257


# ============================================================================
# Leaf Functions
# ============================================================================


@dataclass
class LeafFunction:
    """
    Values h(x_i, y_j) on xs = linspace(1/2, 1, Mx), ys = linspace(0, 1, My).

    Attributes:
        values: Mx x My array
        label: Identifier used in audit records
    """

    values: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] < 2:
            raise DomainError("leaf function values must be an Mx x My array with Mx >= 2")
        if self.values.shape[1] < MIN_LEAF_POINTS:
            raise DomainError(f"leaf quadrature needs My >= {MIN_LEAF_POINTS}, got {self.values.shape[1]}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError(f"leaf function {self.label!r} has non-finite values")

    @property
    def mx(self) -> int:
        return self.values.shape[0]

    @property
    def my(self) -> int:
        return self.values.shape[1]

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(0.5, 1.0, self.mx)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.my)

    @property
    def dx(self) -> float:
        return 0.5 / (self.mx - 1)

    @classmethod
    def from_function(
        cls, func: Callable[[np.ndarray, np.ndarray], np.ndarray], grid_x: int, grid_y: int, label: str = ""
    ) -> "LeafFunction":
        xs = np.linspace(0.5, 1.0, grid_x)
        ys = np.linspace(0.0, 1.0, grid_y)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return cls(np.broadcast_to(func(gx, gy), gx.shape).copy(), label)

    def mass(self) -> float:
        """Integral over Y: leaf integrals by trapezoid in y, then trapezoid in x."""
        return float(trapezoid(trapezoid(self.values, self.ys, axis=1), self.xs))


def leaf_integral(h: LeafFunction, x_index: int, phi: np.ndarray) -> float:
    """Composite trapezoid of h(x, .) phi along the leaf at x_index."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (h.my,):
        raise DomainError(f"test function must be tabulated on {h.my} leaf points")
    return float(trapezoid(h.values[x_index] * phi, h.ys))


# ============================================================================
# Test Families
# ============================================================================


@dataclass
class BasisFamily:
    """
    Nested test functions 1, P1, cos 2pi y, sin 2pi y, P2, ... with their norms.

    C^1 and C^q norms are sup|phi| plus the largest difference quotient over a
    common pair set, so the C^q norm never exceeds the C^1 norm.
    """

    names: List[str]
    values: np.ndarray
    c1_norms: np.ndarray
    cq_norms: np.ndarray
    q: float

    @property
    def weak_tests(self) -> np.ndarray:
        return self.values / self.c1_norms[:, None]

    @property
    def stable_tests(self) -> np.ndarray:
        return self.values / self.cq_norms[:, None]


def _basis_function(k: int, ys: np.ndarray) -> Tuple[str, np.ndarray]:
    if k == 0:
        return "one", np.ones_like(ys)
    order, kind = (k - 1) // 3 + 1, (k - 1) % 3
    if kind == 0:
        return f"P{order}", legendre.Legendre.basis(order, domain=[0.0, 1.0])(ys)
    if kind == 1:
        return f"cos{order}", np.cos(2.0 * np.pi * order * ys)
    return f"sin{order}", np.sin(2.0 * np.pi * order * ys)


def basis_family(basis_size: int, q: float, ys: np.ndarray) -> BasisFamily:
    """
    First basis_size functions of the nested polynomial/trigonometric family.

    Raises:
        DomainError: If basis_size < 8 or q is outside (0, 1)
    """
    if basis_size < 8:
        raise DomainError(f"basis_size must be at least 8, got {basis_size}")
    if not 0.0 < q < 1.0:
        raise DomainError(f"q must lie in (0, 1), got {q}")
    coarse = np.linspace(0.0, 1.0, PAIR_GRID)
    i, j = np.triu_indices(PAIR_GRID, k=1)
    gap = coarse[j] - coarse[i]
    names, rows, c1, cq = [], [], [], []
    for k in range(basis_size):
        name, values = _basis_function(k, ys)
        _, sampled = _basis_function(k, coarse)
        jump = np.abs(sampled[j] - sampled[i])
        sup = max(float(np.abs(sampled).max()), float(np.abs(values).max()))
        names.append(name)
        rows.append(values)
        c1.append(sup + float((jump / gap).max()))
        cq.append(sup + float((jump / gap**q).max()))
    return BasisFamily(names, np.vstack(rows), np.asarray(c1), np.asarray(cq), q)


@lru_cache(maxsize=32)
def _cached_family(basis_size: int, q: float, my: int) -> BasisFamily:
    return basis_family(basis_size, q, np.linspace(0.0, 1.0, my))


def _leaf_integrals(h: LeafFunction, tests: np.ndarray) -> np.ndarray:
    return trapezoid(h.values[:, None, :] * tests[None, :, :], h.ys, axis=-1)


def estimate_norms(
    h: LeafFunction, q: float = 0.5, basis_size: int = 37, window: Optional[int] = None
) -> NormEstimate:
    """
    Weak, strong stable and unstable norm estimates of h.

    Args:
        h: Leaf function
        q: Hoelder exponent of the stable tests
        basis_size: Number of test functions
        window: Largest leaf separation, in grid steps, for the unstable quotient

    Returns:
        NormEstimate: Lower bounds of the three suprema
    """
    family = _cached_family(basis_size, q, h.my)
    weak_integrals = _leaf_integrals(h, family.weak_tests)
    stable_integrals = _leaf_integrals(h, family.stable_tests)
    window = window or max(1, h.mx // 16)
    unstable = 0.0
    for shift in range(1, min(window, h.mx - 1) + 1):
        diff = np.abs(weak_integrals[shift:] - weak_integrals[:-shift]) / (shift * h.dx)
        unstable = max(unstable, float(diff.max()))
    return NormEstimate(
        weak=float(np.abs(weak_integrals).max()),
        strong_stable=float(np.abs(stable_integrals).max()),
        unstable=unstable,
        q=q,
        basis_size=basis_size,
    )


# ============================================================================
# 2D Transfer Operator
# ============================================================================


class LeafTransfer:
    """
    Induced skew-product transfer operator on a fixed leaf grid.

    For every level n the backward orbit of each target leaf X is stored as
    the source point x0 = W_n(X), the return-map derivative F0'(x0) and the
    offset A_n(x0) of the strip G(x0, [0, 1]) = [A_n, A_n + c^n]. The orbits do
    not depend on h, so one instance serves every application.
    """

    def __init__(
        self,
        sp: SkewProduct,
        partition: ReturnPartition,
        grid_x: int,
        grid_y: int,
        levels: Optional[int] = None,
    ) -> None:
        if not sp.base.markov or sp.contraction is None:
            raise DomainError("the 2D transfer operator needs a Markov LSV base with an affine fiber")
        if grid_y < MIN_LEAF_POINTS:
            raise DomainError(f"leaf quadrature needs My >= {MIN_LEAF_POINTS}, got {grid_y}")
        self.sp = sp
        self.grid_x = grid_x
        self.grid_y = grid_y
        self.levels = min(levels or partition.n_max, partition.n_max, MAX_LEVELS)
        ys = np.linspace(0.0, 1.0, grid_y)
        self.bounds = np.concatenate([[0.0], 0.5 * (ys[1:] + ys[:-1]), [1.0]])
        self.cells = np.diff(self.bounds)
        self._backward_orbits(np.linspace(0.5, 1.0, grid_x))
        logger.info("Leaf transfer: %d levels on a %d x %d grid", self.levels, grid_x, grid_y)

    def _backward_orbits(self, xs: np.ndarray) -> None:
        c = self.sp.contraction
        spread = 1.0 - 2.0 * c
        shape = (self.levels, xs.size)
        self.source = np.empty(shape)
        self.jacobian = np.empty(shape)
        self.offset = np.empty(shape)
        self.width = np.empty(self.levels)
        u = xs.copy()
        log_chain = np.zeros_like(xs)
        weighted = np.zeros_like(xs)
        shrink = 1.0
        for level in range(1, self.levels + 1):
            if level >= 2:
                u = left_preimage_array(u, self.sp.base.alpha)
                log_chain += np.log(self.sp.base.derivative(u))
                weighted += shrink * u
                shrink *= c
            x0 = 0.5 * (u + 1.0)
            row = level - 1
            self.source[row] = x0
            self.jacobian[row] = 2.0 * np.exp(log_chain)
            self.offset[row] = shrink * (spread * x0 + c) + spread * weighted
            self.width[row] = shrink * c

    def apply(self, h: LeafFunction, only_level: Optional[int] = None) -> LeafFunction:
        """
        Cell averages of R h (or of its level-n piece) on the dual y-cells.

        Raises:
            DomainError: If h is on another grid or only_level is out of range
        """
        if h.values.shape != (self.grid_x, self.grid_y):
            raise DomainError(f"leaf function grid {h.values.shape} does not match the operator")
        rows = np.arange(self.levels)
        if only_level is not None:
            if not 1 <= only_level <= self.levels:
                raise DomainError(f"level {only_level} outside 1..{self.levels}")
            rows = np.array([only_level - 1])
        primitive = cumulative_trapezoid(h.values, h.ys, axis=1, initial=0.0)
        interp = RegularGridInterpolator((h.xs, h.ys), primitive)

        def Q(x, t):
            x, t = np.broadcast_arrays(x, t)
            return interp(np.stack([x.ravel(), np.clip(t.ravel(), 0.0, 1.0)], axis=-1)).reshape(x.shape)

        mx, my = self.grid_x, self.grid_y
        flat = np.zeros(mx * my)
        wide = rows[self.width[rows] > self.cells.min()]
        narrow = rows[self.width[rows] <= self.cells.min()]

        for row in wide:
            x0 = self.source[row]
            t = (self.bounds[None, :] - self.offset[row][:, None]) / self.width[row]
            contrib = np.diff(Q(x0[:, None], t), axis=1) / self.jacobian[row][:, None]
            flat += contrib.ravel()

        if narrow.size:
            x0 = self.source[narrow]
            off = self.offset[narrow]
            jac = self.jacobian[narrow]
            width = np.broadcast_to(self.width[narrow][:, None], off.shape)
            cell = np.clip(np.searchsorted(self.bounds, off, side="right") - 1, 0, my - 1)
            top = self.bounds[np.minimum(cell + 1, my)]
            total = Q(x0, 1.0)
            first = total.copy()
            straddle = (off + width > top) & (cell < my - 1)
            if np.any(straddle):
                t_split = (top[straddle] - off[straddle]) / width[straddle]
                first[straddle] = Q(x0[straddle], t_split)
            leaf = np.broadcast_to(np.arange(mx)[None, :], off.shape)
            index = leaf * my + cell
            flat += np.bincount(index.ravel(), weights=(first / jac).ravel(), minlength=mx * my)
            if np.any(straddle):
                flat += np.bincount(
                    (index + 1)[straddle],
                    weights=((total - first) / jac)[straddle],
                    minlength=mx * my,
                )

        values = flat.reshape(mx, my) / self.cells[None, :]
        return LeafFunction(values, h.label)


def transfer_2d(
    h: LeafFunction,
    sp: SkewProduct,
    partition: ReturnPartition,
    levels: Optional[int] = None,
    only_level: Optional[int] = None,
) -> LeafFunction:
    """
    R h = 1_{F(Y)} h o F^-1 det(DF^-1), discretized on the grid of h.

    Levels beyond min(levels, n_max, 20000) are dropped, so mass is conserved up
    to the Lebesgue measure of the deeper return cells.
    """
    return LeafTransfer(sp, partition, h.mx, h.my, levels).apply(h, only_level)


# ============================================================================
# Lasota-Yorke Audit
# ============================================================================


def mixed_samples(grid_x: int, grid_y: int, count: int = 20, seed: int = 0) -> List[LeafFunction]:
    """
    Pool of constant, smooth, rough and mixed leaf functions.

    The first rough sample is sign(y - 1/2).
    """
    rng = np.random.default_rng(seed)
    samples = []
    for k in range(count):
        kind = k % 4
        if kind == 0:
            func = lambda x, y: np.ones_like(x)  # noqa: E731
            name = "const"
        elif kind == 1:
            fx, fy = rng.integers(1, 5, size=2)
            px, py = rng.uniform(0.0, 2.0 * np.pi, size=2)
            func = lambda x, y, fx=fx, fy=fy, px=px, py=py: 1.0 + 0.5 * np.sin(
                2.0 * np.pi * fy * y + py
            ) * np.cos(2.0 * np.pi * fx * x + px)
            name = "smooth"
        elif kind == 2:
            cut = 0.5 if k == 2 else float(rng.uniform(0.2, 0.8))
            func = lambda x, y, cut=cut: np.sign(y - cut)
            name = "rough"
        else:
            cut = float(rng.uniform(0.2, 0.8))
            fx = int(rng.integers(1, 4))
            func = lambda x, y, cut=cut, fx=fx: (1.0 + 0.5 * np.cos(2.0 * np.pi * fx * x)) * (y < cut)
            name = "mixed"
        samples.append(LeafFunction.from_function(func, grid_x, grid_y, f"{name}-{k}"))
    return samples


def _basis_stability(samples: Sequence[LeafFunction], q: float, basis_size: int) -> float:
    worst = 0.0
    for h in samples:
        small = estimate_norms(h, q, basis_size)
        large = estimate_norms(h, q, 2 * basis_size)
        for a, b in ((small.weak, large.weak), (small.strong, large.strong)):
            if a > 0:
                worst = max(worst, abs(b - a) / a)
    return worst


def ly_audit(
    sp: SkewProduct,
    partition: ReturnPartition,
    h_samples: Sequence[LeafFunction],
    n_powers: Sequence[int],
    q: float = 0.5,
    basis_size: int = 37,
    slack: float = 1.25,
    levels: Optional[int] = None,
) -> LYAuditReport:
    """
    Check strong(R^n h) <= slack (lam^-nq strong(h) + C weak(h)) with lam = 1 / lambda_inv.

    C is the smallest constant that works on the even-indexed samples; the odd
    ones are held out. The excess ratio is the median per-application decay of
    strong(R^n h - R^(n-1) h).
    """
    if not h_samples:
        raise DomainError("the audit needs at least one test function")
    first = h_samples[0]
    transfer = LeafTransfer(sp, partition, first.mx, first.my, levels)
    lam = 1.0 / sp.lambda_inv
    powers = sorted(set(int(n) for n in n_powers))
    if powers[0] < 1:
        raise DomainError("powers of R must be positive")

    measured = []
    ratios = []
    for idx, h in enumerate(h_samples):
        base = estimate_norms(h, q, basis_size)
        current = h
        previous_excess = None
        for n in range(1, powers[-1] + 1):
            image = transfer.apply(current)
            excess = estimate_norms(
                LeafFunction(image.values - current.values, h.label), q, basis_size
            ).strong
            if previous_excess is not None and previous_excess > 1e-12 * max(base.strong, 1.0):
                ratios.append(excess / previous_excess)
            previous_excess = excess
            current = image
            if n in powers:
                strong_n = estimate_norms(current, q, basis_size).strong
                measured.append((h.label, n, strong_n, base, idx % 2 == 0))

    fitted_c = 0.0
    for _, n, strong_n, base, calibration in measured:
        if calibration and base.weak > 0:
            fitted_c = max(fitted_c, (strong_n - lam ** (-n * q) * base.strong) / base.weak)

    records = []
    for label, n, strong_n, base, calibration in measured:
        rhs = slack * (lam ** (-n * q) * base.strong + fitted_c * base.weak)
        records.append(
            AuditRecord(
                h_id=label,
                n=n,
                strong=strong_n,
                weak=base.weak,
                rhs=rhs,
                passed=bool(strong_n <= rhs * (1.0 + 1e-12) + 1e-15),
                calibration=calibration,
            )
        )
    excess_ratio = float(np.median(ratios)) if ratios else None
    report = LYAuditReport(
        q=q,
        lam=lam,
        fitted_c=fitted_c,
        slack=slack,
        records=records,
        excess_ratio=excess_ratio,
        contraction_visible=bool(excess_ratio is not None and excess_ratio <= lam ** (-q) + 0.1),
        basis_stability=_basis_stability(h_samples, q, basis_size),
    )
    logger.info(
        "LY audit: C=%.4g, %d/%d records pass, excess ratio %s",
        fitted_c,
        sum(r.passed for r in records),
        len(records),
        "n/a" if excess_ratio is None else f"{excess_ratio:.3f}",
    )
    return report


def slice_norm_decay(
    sp: SkewProduct,
    partition: ReturnPartition,
    grid_x: int,
    grid_y: int,
    window: Tuple[int, int] = (10, 2000),
    points: int = 12,
    q: float = 0.5,
    basis_size: int = 37,
    tolerance: float = 0.1,
) -> NormDecayReport:
    """Regress strong(R_n 1) against n; the expected slope is -(1 + beta)."""
    lo, hi = window
    transfer = LeafTransfer(sp, partition, grid_x, grid_y, hi)
    levels = log_grid(lo, min(hi, transfer.levels), points)
    one = LeafFunction(np.ones((grid_x, grid_y)), "one")
    strong = [estimate_norms(transfer.apply(one, only_level=int(n)), q, basis_size).strong for n in levels]
    fit = loglog_fit(levels, np.asarray(strong))
    return NormDecayReport(
        levels=[int(n) for n in levels],
        strong=strong,
        slope=fit.slope,
        slope_stderr=fit.slope_stderr,
        expected_slope=-(1.0 + sp.base.beta),
        tolerance=tolerance,
    )


# ============================================================================
# Distortion
# ============================================================================


def _branch_quotients(spec: IntervalMapSpec, lo: float, hi: float, samples: int):
    xs = lo + (hi - lo) * (np.arange(samples) + 0.5) / samples
    image, _, deriv = induced_derivative(spec, xs)
    ratio = np.abs(deriv[1:] / deriv[:-1] - 1.0) / np.diff(xs)
    log_gap = np.abs(np.diff(np.log(np.abs(deriv))))
    image_gap = np.abs(np.diff(image))
    image_ratio = np.where(image_gap > 0, log_gap / np.where(image_gap > 0, image_gap, 1.0), 0.0)
    return float(ratio.max()), float(image_ratio.max())


def distortion_bounds(
    spec: IntervalMapSpec,
    partition: ReturnPartition,
    levels: Sequence[int] = (1, 2, 5, 10, 50, 100),
    samples: int = 64,
) -> DistortionReport:
    """
    Sampled distortion of F0 on each return branch.

    bounds[k] is max |F0'(x)/F0'(x') - 1| / |x - x'| over neighbouring samples
    of the cells of level k; image_bounds measures log-derivative changes
    against image distance. The refinement change compares image bounds at
    samples and 2 samples points.
    """
    kept, bounds, image_bounds, change = [], [], [], 0.0
    for n in levels:
        cells = np.nonzero(partition.cell_n == n)[0]
        if cells.size == 0:
            continue
        coarse = [_branch_quotients(spec, partition.cell_lo[c], partition.cell_hi[c], samples) for c in cells]
        fine = [_branch_quotients(spec, partition.cell_lo[c], partition.cell_hi[c], 2 * samples) for c in cells]
        kept.append(int(n))
        bounds.append(max(b for b, _ in coarse))
        image_coarse = max(b for _, b in coarse)
        image_fine = max(b for _, b in fine)
        image_bounds.append(image_coarse)
        if image_coarse > 0:
            change = max(change, abs(image_fine - image_coarse) / image_coarse)
    return DistortionReport(levels=kept, bounds=bounds, image_bounds=image_bounds, refinement_change=change)
