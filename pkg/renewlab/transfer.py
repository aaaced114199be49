"""
Ulam Discretization of the Induced Transfer Operator

Vectors on the grid are cell masses, so the discretized operator is column
stochastic: column j holds the distribution of F0(C_j) over the grid cells.
Entries are computed from exact branch inverses, level by level in the return
time n. Slices with n <= exact_levels are stored entry by entry; deeper slices
touch only a few columns next to x = 1/2 and are kept as per-column masses
times a target profile shared inside geometric blocks of levels. Column sums
and level masses stay exact; the history matrix and R(z) carry the shared
profile error of those deep levels.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy import special

from renewlab.errors import ConvergenceError, DomainError, NegativeMassError
from renewlab.fitting import log_grid, loglog_fit
from renewlab.maps import IntervalMapSpec, ReturnPartition, build_return_partition, left_preimage_array
from renewlab.schemas import (
    EigenAsymptoticReport,
    ProjectionReport,
    RefinementReport,
    SliceDecayReport,
    SpectralSummary,
)

logger = logging.getLogger(__name__)

BLOCK_RATIO = 1.02


@dataclass(frozen=True)
class Grid:
    """Uniform grid of M cells on (1/2, 1]."""

    M: int

    def __post_init__(self) -> None:
        if self.M < 2:
            raise DomainError(f"grid needs at least 2 cells, got {self.M}")

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.5, 1.0, self.M + 1)

    @property
    def width(self) -> float:
        return 0.5 / self.M

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    def locate(self, x: np.ndarray) -> np.ndarray:
        """Index of the left-open cell containing each x."""
        idx = np.searchsorted(self.edges, np.asarray(x, dtype=float), side="left") - 1
        return np.clip(idx, 0, self.M - 1)


@dataclass
class OperatorLedger:
    """
    Level-tagged entries accumulated while building the operator.

    Attributes:
        levels, rows, cols, vals: Exact entries for levels <= exact_levels
        tail_level, tail_col, tail_mass: Column masses of deeper levels
        block_keys: (block, column) of every accumulated profile
        block_sums: Summed target vectors per block key
        overflow: Entries of the lumped {phi > n_max} slice
        level_mass: Lebesgue measure carried by each slice
        level_colmax: Largest column sum of each slice
    """

    m: int
    n_max: int
    exact_levels: int
    levels: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    tail_level: np.ndarray
    tail_col: np.ndarray
    tail_mass: np.ndarray
    tail_key: np.ndarray
    block_keys: List[Tuple[int, int]]
    block_sums: np.ndarray
    overflow: sp.csr_matrix
    level_mass: np.ndarray
    level_colmax: np.ndarray


@dataclass
class ReturnSlices:
    """
    Return-time slices R_n of a discretized operator.

    The exact part is one CSC matrix [R_1 | R_2 | ... | R_E] whose column
    (n - 1) * M + c is column c of R_n.
    """

    m: int
    n_max: int
    exact_levels: int
    exact: sp.csc_matrix
    ledger: OperatorLedger
    profiles: np.ndarray
    overflow: sp.csr_matrix
    identity_error: float
    _history: Optional[sp.csc_matrix] = field(default=None, repr=False)

    def slice(self, n: int) -> sp.csr_matrix:
        m = self.m
        if 1 <= n <= self.exact_levels:
            return self.exact[:, (n - 1) * m : n * m].tocsr()
        if self.exact_levels < n <= self.n_max:
            pick = self.ledger.tail_level == n
            return self._tail_columns(self.ledger.tail_col[pick], self.ledger.tail_mass[pick], self.ledger.tail_key[pick])
        if n == self.n_max + 1:
            return self.overflow.copy()
        return sp.csr_matrix((m, m))

    def _tail_columns(self, cols, masses, keys) -> sp.csr_matrix:
        m = self.m
        if cols.size == 0:
            return sp.csr_matrix((m, m))
        block = self.profiles[keys] * masses[:, None]
        r, k = np.nonzero(block.T)
        return sp.csr_matrix((block.T[r, k], (r, cols[k])), shape=(m, m))

    def history_matrix(self, horizon: int) -> sp.csc_matrix:
        """[R_1 | ... | R_horizon] as one CSC matrix."""
        if horizon > self.n_max:
            raise DomainError(f"horizon {horizon} exceeds n_max {self.n_max}")
        if self._history is not None and self._history.shape[1] >= horizon * self.m:
            return self._history
        m = self.m
        upto = min(horizon, self.exact_levels)
        parts = [self.exact[:, : upto * m]]
        for n in range(self.exact_levels + 1, horizon + 1):
            parts.append(self.slice(n).tocsc())
        history = sp.hstack(parts, format="csc") if len(parts) > 1 else parts[0].tocsc()
        history.sort_indices()
        self._history = history
        return history

    def masses(self) -> np.ndarray:
        """Lebesgue measure carried by slice n, for n = 0..n_max + 1."""
        return self.ledger.level_mass


@dataclass
class DiscretizedOperator:
    """
    Ulam matrix of the induced transfer operator.

    Attributes:
        grid: Uniform grid of Y
        matrix: Column-stochastic M x M matrix
        n_max: Return-time truncation
        ledger: Level-tagged entries used to split the matrix by return time
        slices: Filled by split_by_return_time
    """

    grid: Grid
    matrix: sp.csr_matrix
    n_max: int
    ledger: OperatorLedger
    slices: Optional[ReturnSlices] = None

    @property
    def column_sum_error(self) -> float:
        sums = np.asarray(self.matrix.sum(axis=0)).ravel()
        return float(np.max(np.abs(sums - 1.0)))

    @classmethod
    def from_slices(cls, grid: Grid, slices: Sequence[np.ndarray], overflow: Optional[np.ndarray] = None):
        """Operator whose return-time slices are given explicitly (slices[0] is R_1)."""
        m = grid.M
        levels, rows, cols, vals = [], [], [], []
        level_mass = np.zeros(len(slices) + 2)
        level_colmax = np.zeros(len(slices) + 2)
        for n, s in enumerate(slices, start=1):
            coo = sp.coo_matrix(np.asarray(s, dtype=float))
            levels.append(np.full(coo.nnz, n, dtype=np.int64))
            rows.append(coo.row.astype(np.int64))
            cols.append(coo.col.astype(np.int64))
            vals.append(coo.data)
            level_mass[n] = coo.data.sum() * grid.width
            level_colmax[n] = np.asarray(np.abs(s).sum(axis=0)).max(initial=0.0)
        over = sp.csr_matrix(np.zeros((m, m)) if overflow is None else np.asarray(overflow, dtype=float))
        level_mass[-1] = over.sum() * grid.width
        ledger = _ledger(
            m, len(slices), len(slices), levels, rows, cols, vals, [], [], [], [], [], np.zeros((0, m)),
            over, level_mass, level_colmax,
        )
        matrix = sp.csr_matrix((ledger.vals, (ledger.rows, ledger.cols)), shape=(m, m)) + over
        return cls(grid=grid, matrix=sp.csr_matrix(matrix), n_max=len(slices), ledger=ledger)


def _ledger(m, n_max, exact, levels, rows, cols, vals, t_lev, t_col, t_mass, t_key, keys, sums, over, lmass, lcol):
    def cat(parts, dtype):
        return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype=dtype)

    return OperatorLedger(
        m=m,
        n_max=n_max,
        exact_levels=exact,
        levels=cat(levels, np.int64),
        rows=cat(rows, np.int64),
        cols=cat(cols, np.int64),
        vals=cat(vals, float),
        tail_level=np.asarray(t_lev, dtype=np.int64),
        tail_col=np.asarray(t_col, dtype=np.int64),
        tail_mass=np.asarray(t_mass, dtype=float),
        tail_key=np.asarray(t_key, dtype=np.int64),
        block_keys=list(keys),
        block_sums=sums,
        overflow=over,
        level_mass=lmass,
        level_colmax=lcol,
    )


def _level_entries(W: np.ndarray, spec: IntervalMapSpec, edges: np.ndarray, width: float):
    """Entries of one return-time level given the pulled-back target edges W."""
    m = edges.size - 1
    rows_out, cols_out, vals_out = [], [], []
    for b in spec.right_branches:
        ilo, ihi = b.image
        a = np.maximum(W[:-1], ilo)
        c = np.minimum(W[1:], ihi)
        keep = c > a
        if not keep.any():
            continue
        rows = np.nonzero(keep)[0]
        pa, pc = b.inverse(a[keep]), b.inverse(c[keep])
        xa = np.clip(np.minimum(pa, pc), b.lo, b.hi)
        xc = np.clip(np.maximum(pa, pc), b.lo, b.hi)
        ja = np.clip(np.searchsorted(edges, xa, side="right") - 1, 0, m - 1)
        jc = np.clip(np.searchsorted(edges, xc, side="left") - 1, 0, m - 1)
        if np.any(jc - ja > 1):
            raise DomainError("branch expansion below 2: a target cell pulls back across 3 grid cells")
        same = ja == jc
        cut = edges[np.minimum(ja + 1, m)]
        first = np.where(same, xc - xa, cut - xa) / width
        split = ~same
        rows_out += [rows, rows[split]]
        cols_out += [ja, jc[split]]
        vals_out += [first, (xc[split] - cut[split]) / width]
    if not rows_out:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    vals = np.concatenate(vals_out)
    keep = vals > 0
    return np.concatenate(rows_out)[keep], np.concatenate(cols_out)[keep], vals[keep]


def _block_starts(first: int, last: int, ratio: float) -> np.ndarray:
    starts = [first]
    while starts[-1] <= last:
        starts.append(max(starts[-1] + 1, int(math.ceil(starts[-1] * ratio))))
    return np.asarray(starts, dtype=np.int64)


def build_induced_operator(
    spec: IntervalMapSpec,
    partition: ReturnPartition,
    grid: Grid,
    exact_levels: Optional[int] = None,
    block_ratio: float = BLOCK_RATIO,
) -> DiscretizedOperator:
    """
    Ulam matrix of the first-return transfer operator on Y.

    Entry (i, j) is m(C_j & F0^-1 C_i) / m(C_j). For return time n the target
    edges are pulled back by n - 1 left-branch inverses and then by each right
    branch, so every entry is a difference of exactly inverted endpoints.

    Args:
        spec: Interval map
        partition: Return partition of the same map (fixes n_max)
        grid: Uniform grid of Y
        exact_levels: Levels stored entry by entry (default: all)
        block_ratio: Growth ratio of the level blocks sharing a target profile

    Returns:
        DiscretizedOperator: Column-stochastic operator with its ledger
    """
    if not math.isclose(partition.alpha, spec.alpha):
        raise DomainError("partition was built for a different map")
    n_max = partition.n_max
    exact = n_max if exact_levels is None else max(1, min(exact_levels, n_max))
    m = grid.M
    edges = grid.edges
    width = grid.width

    starts = _block_starts(exact + 1, n_max, block_ratio)
    level_mass = np.zeros(n_max + 2)
    level_colmax = np.zeros(n_max + 2)
    ex_lev, ex_rows, ex_cols, ex_vals = [], [], [], []
    t_lev, t_col, t_mass, t_key = [], [], [], []
    key_index: Dict[Tuple[int, int], int] = {}
    sums: List[np.ndarray] = []
    last_exact_level = np.zeros(m, dtype=np.int64)

    W = edges.copy()
    for n in range(1, n_max + 1):
        if n >= 2:
            upper = W[0]
            W = left_preimage_array(W, spec.alpha)
            W[-1] = upper
        rows, cols, vals = _level_entries(W, spec, edges, width)
        if vals.size == 0:
            continue
        colsum = np.bincount(cols, weights=vals, minlength=m)
        level_mass[n] = vals.sum() * width
        level_colmax[n] = colsum.max()
        if n <= exact:
            ex_lev.append(np.full(vals.size, n, dtype=np.int64))
            ex_rows.append(rows)
            ex_cols.append(cols)
            ex_vals.append(vals)
            last_exact_level[np.unique(cols)] = n
            continue
        block = int(np.searchsorted(starts, n, side="right") - 1)
        for c in np.nonzero(colsum)[0]:
            key = (block, int(c))
            if key not in key_index:
                key_index[key] = len(sums)
                sums.append(np.zeros(m))
            k = key_index[key]
            pick = cols == c
            np.add.at(sums[k], rows[pick], vals[pick])
            t_lev.append(n)
            t_col.append(int(c))
            t_mass.append(float(colsum[c]))
            t_key.append(k)

    block_sums = np.vstack(sums) if sums else np.zeros((0, m))
    levels = np.concatenate(ex_lev) if ex_lev else np.zeros(0, dtype=np.int64)
    rows_e = np.concatenate(ex_rows) if ex_rows else np.zeros(0, dtype=np.int64)
    cols_e = np.concatenate(ex_cols) if ex_cols else np.zeros(0, dtype=np.int64)
    vals_e = np.concatenate(ex_vals) if ex_vals else np.zeros(0)

    covered = np.bincount(cols_e, weights=vals_e, minlength=m)
    keys = sorted(key_index, key=key_index.get)
    for (blk, c), k in key_index.items():
        covered[c] += block_sums[k].sum()
    deficit = 1.0 - covered
    if deficit.min() < -1e-12:
        raise NegativeMassError(f"grid column {int(np.argmin(deficit))} is over-covered by {-deficit.min():.3e}")
    deficit = np.clip(deficit, 0.0, None)

    over_rows, over_cols, over_vals = [], [], []
    for c in np.nonzero(deficit > 0)[0]:
        profile = _deepest_profile(int(c), key_index, block_sums, levels, rows_e, cols_e, vals_e, last_exact_level, m)
        nz = np.nonzero(profile)[0]
        over_rows.append(nz)
        over_cols.append(np.full(nz.size, c))
        over_vals.append(deficit[c] * profile[nz])
    overflow = sp.csr_matrix(
        (
            np.concatenate(over_vals) if over_vals else np.zeros(0),
            (
                np.concatenate(over_rows) if over_rows else np.zeros(0, dtype=np.int64),
                np.concatenate(over_cols) if over_cols else np.zeros(0, dtype=np.int64),
            ),
        ),
        shape=(m, m),
    )
    level_mass[n_max + 1] = deficit.sum() * width
    level_colmax[n_max + 1] = deficit.max(initial=0.0)

    ledger = _ledger(
        m, n_max, exact, [levels], [rows_e], [cols_e], [vals_e], t_lev, t_col, t_mass, t_key, keys,
        block_sums, overflow, level_mass, level_colmax,
    )
    parts = [sp.csr_matrix((vals_e, (rows_e, cols_e)), shape=(m, m)), overflow]
    if keys:
        br, bc, bv = _profile_entries(block_sums, [c for _, c in keys])
        parts.append(sp.csr_matrix((bv, (br, bc)), shape=(m, m)))
    matrix = sp.csr_matrix(sum(parts[1:], parts[0]))
    op = DiscretizedOperator(grid=grid, matrix=matrix, n_max=n_max, ledger=ledger)
    error = op.column_sum_error
    if error > 1e-12:
        logger.warning("Column sums deviate from 1 by %.3e", error)
    logger.info(
        "Built Ulam operator M=%d n_max=%d exact_levels=%d nnz=%d overflow mass %.3e",
        m, n_max, exact, matrix.nnz, level_mass[n_max + 1],
    )
    return op


def _deepest_profile(c, key_index, block_sums, levels, rows, cols, vals, last_exact_level, m) -> np.ndarray:
    """Normalized target distribution of the deepest stored level touching column c."""
    blocks = [(blk, k) for (blk, col), k in key_index.items() if col == c]
    if blocks:
        vec = block_sums[max(blocks)[1]].copy()
    elif last_exact_level[c] > 0:
        pick = (cols == c) & (levels == last_exact_level[c])
        vec = np.bincount(rows[pick], weights=vals[pick], minlength=m)
    else:
        vec = np.ones(m)
    return vec / vec.sum()


def _profile_entries(profiles: np.ndarray, columns: Sequence[int]):
    k, r = np.nonzero(profiles)
    return r, np.asarray(columns, dtype=np.int64)[k], profiles[k, r]


def split_by_return_time(op: DiscretizedOperator, partition: ReturnPartition) -> DiscretizedOperator:
    """
    Organize the ledger into return-time slices and verify sum_n R_n + overflow = R.

    Returns:
        DiscretizedOperator: The same operator with slices filled
    """
    if partition.n_max != op.n_max:
        raise DomainError(f"operator built with n_max={op.n_max}, partition has {partition.n_max}")
    ledger = op.ledger
    m = ledger.m
    exact = sp.csc_matrix(
        (ledger.vals, (ledger.rows, (ledger.levels - 1) * m + ledger.cols)),
        shape=(m, ledger.exact_levels * m),
    )
    exact.sum_duplicates()
    sums = ledger.block_sums
    totals = sums.sum(axis=1) if sums.size else np.zeros(0)
    profiles = sums / np.where(totals > 0, totals, 1.0)[:, None] if sums.size else sums

    total = sp.csr_matrix((ledger.vals, (ledger.rows, ledger.cols)), shape=(m, m))
    if ledger.tail_level.size:
        weight = np.bincount(ledger.tail_key, weights=ledger.tail_mass, minlength=profiles.shape[0])
        br, bc, bv = _profile_entries(profiles * weight[:, None], [c for _, c in ledger.block_keys])
        total = total + sp.csr_matrix((bv, (br, bc)), shape=(m, m))
    total = total + ledger.overflow
    diff = (total - op.matrix).tocoo()
    identity_error = float(np.max(np.abs(diff.data), initial=0.0))
    if identity_error > 1e-12:
        logger.warning("Slice identity error %.3e exceeds 1e-12", identity_error)
    op.slices = ReturnSlices(
        m=m,
        n_max=op.n_max,
        exact_levels=ledger.exact_levels,
        exact=exact,
        ledger=ledger,
        profiles=profiles,
        overflow=ledger.overflow,
        identity_error=identity_error,
    )
    return op


def perturbed_operator(op: DiscretizedOperator, z: complex) -> sp.csr_matrix:
    """
    R(z) = sum_n z^n R_n with the overflow slice weighted z^(n_max + 1).

    Raises:
        DomainError: If |z| > 1 or the slices are missing
    """
    if abs(z) > 1.0 + 1e-15:
        raise DomainError(f"|z| = {abs(z)} exceeds 1")
    if op.slices is None:
        raise DomainError("split_by_return_time must run before perturbed_operator")
    if z == 1:
        return op.matrix.copy()
    ledger = op.ledger
    m = ledger.m
    zc = complex(z)
    zz = zc.real if zc.imag == 0 else zc
    parts = [sp.csr_matrix((ledger.vals * np.power(zz, ledger.levels), (ledger.rows, ledger.cols)), shape=(m, m))]
    if ledger.tail_level.size:
        w = ledger.tail_mass * np.power(zz, ledger.tail_level)
        keys = ledger.tail_key
        k_count = op.slices.profiles.shape[0]
        weight = np.bincount(keys, weights=np.real(w), minlength=k_count)
        if isinstance(zz, complex):
            weight = weight + 1j * np.bincount(keys, weights=np.imag(w), minlength=k_count)
        br, bc, bv = _profile_entries(op.slices.profiles, [c for _, c in ledger.block_keys])
        k_idx = np.nonzero(op.slices.profiles)[0]
        parts.append(sp.csr_matrix((bv * weight[k_idx], (br, bc)), shape=(m, m)))
    parts.append(ledger.overflow * zz ** (op.n_max + 1))
    return sp.csr_matrix(sum(parts[1:], parts[0]))


# ============================================================================
# Spectral Data
# ============================================================================


@dataclass(frozen=True)
class RankOneProjection:
    """P = right (x) left, normalized so that sum(right) = 1 and left . right = 1."""

    right: np.ndarray
    left: np.ndarray

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.right * (self.left @ v)

    def matrix(self) -> np.ndarray:
        return np.outer(self.right, self.left)

    def idempotency_error(self) -> float:
        """Operator 2-norm of P^2 - P."""
        return float(
            abs(self.left @ self.right - 1.0) * np.linalg.norm(self.right) * np.linalg.norm(self.left)
        )


@dataclass(frozen=True)
class SpectralData:
    z: complex
    lam: complex
    gap: float
    right: np.ndarray
    left: np.ndarray
    residual: float
    iterations: int

    @property
    def projection(self) -> RankOneProjection:
        return RankOneProjection(self.right, self.left)

    def summary(self) -> SpectralSummary:
        return SpectralSummary(
            z_real=float(np.real(self.z)),
            z_imag=float(np.imag(self.z)),
            lambda_real=float(np.real(self.lam)),
            lambda_imag=float(np.imag(self.lam)),
            gap=self.gap,
            residual=self.residual,
        )


def _power(apply, start: np.ndarray, tol: float, max_iter: int):
    v = start / np.linalg.norm(start)
    lam = 0.0
    residual = math.inf
    for it in range(1, max_iter + 1):
        av = apply(v)
        lam = np.vdot(v, av)
        residual = float(np.linalg.norm(av - lam * v))
        if residual <= tol:
            return lam, v, residual, it
        norm = np.linalg.norm(av)
        if norm == 0.0:
            return 0.0, v, 0.0, it
        v = av / norm
    raise ConvergenceError(
        f"power iteration did not reach residual {tol:.1e} in {max_iter} steps (last {residual:.3e})",
        last_residual=residual,
    )


def leading_eigen(
    matrix,
    tol: float = 1e-12,
    max_iter: int = 200_000,
    start: Optional[np.ndarray] = None,
    seed: int = 0,
    gap_iter: int = 400,
    z: complex = 1.0,
) -> SpectralData:
    """
    Leading eigenvalue, eigenvectors and second-modulus estimate by power iteration.

    Args:
        matrix: Square sparse or dense matrix
        tol: Residual tolerance ||Av - lambda v|| <= tol ||v||
        max_iter: Iteration cap
        start: Optional starting vector (defaults to the uniform vector)
        seed: Seed of the deflated iteration's random start
        gap_iter: Steps of the deflated iteration
        z: Generating variable recorded in the result

    Raises:
        ConvergenceError: If the residual tolerance is not met within max_iter
    """
    a = matrix
    m = a.shape[0]
    if a.shape != (m, m):
        raise DomainError(f"matrix must be square, got {a.shape}")
    dtype = np.result_type(a.dtype, float)
    v0 = np.full(m, 1.0 / m, dtype=dtype) if start is None else np.asarray(start, dtype=dtype)
    lam, right, residual, iters = _power(lambda v: a @ v, v0, tol, max_iter)
    at = a.T
    _, left, _, _ = _power(lambda v: at @ v, np.ones(m, dtype=dtype), tol, max_iter)

    total = right.sum()
    if abs(total) > 1e-300:
        right = right / total
    pairing = left @ right
    if abs(pairing) > 1e-300:
        left = left / pairing

    rng = np.random.default_rng(seed)
    x = rng.standard_normal(m).astype(dtype)
    logs = []
    for _ in range(gap_iter):
        y = a @ x - lam * right * (left @ x)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            logs = [-math.inf]
            break
        logs.append(math.log(norm / np.linalg.norm(x)))
        x = y / norm
    tail = logs[len(logs) // 2 :]
    gap = float(math.exp(np.mean(tail))) if tail and np.isfinite(tail).all() else 0.0
    return SpectralData(
        z=z, lam=lam, gap=gap, right=right, left=left, residual=residual, iterations=iters
    )


def spectral_projection_check(
    op: DiscretizedOperator,
    sd: SpectralData,
    trials: int = 6,
    iterations: int = 200,
    seed: int = 0,
    floor: float = 1e-13,
) -> ProjectionReport:
    """
    Geometric convergence of R^k v to right * <v, 1>.

    The constant C is fitted on the first half of the iterates and must
    bound the second half up to a factor 2. Errors below the accuracy of the
    computed fixed point (1e3 * |R right - right| * |v|) are not scored.
    """
    a = op.matrix
    right = np.real(sd.right)
    rate = min(1.0, sd.gap + 0.01)
    rng = np.random.default_rng(seed)
    m = right.size
    fixed = float(np.abs(a @ right - right).sum())
    fitted_c = 0.0
    holdout = 0.0
    half = iterations // 2
    curves = []
    levels = []
    for t in range(trials):
        if t % 2 == 0:
            v = rng.random(m)
            v /= v.sum()
        else:
            v = rng.standard_normal(m)
            v -= v.mean()
        target = right * v.sum()
        levels.append(max(floor, 1e3 * fixed * float(np.abs(v).sum())))
        x = v
        errs = np.empty(iterations)
        for k in range(iterations):
            x = a @ x
            errs[k] = np.abs(x - target).sum()
        curves.append(errs)
    powers = rate ** np.arange(1, iterations + 1)
    for errs, level in zip(curves, levels):
        head = errs[:half]
        ok = head > level
        if ok.any():
            fitted_c = max(fitted_c, float(np.max(head[ok] / powers[:half][ok])))
    for errs, level in zip(curves, levels):
        tail = errs[half:]
        ok = tail > level
        if ok.any() and fitted_c > 0:
            holdout = max(holdout, float(np.max(tail[ok] / (fitted_c * powers[half:][ok]))))
    return ProjectionReport(
        trials=trials,
        iterations=iterations,
        gap=sd.gap,
        fitted_c=fitted_c,
        fixed_point_error=fixed,
        worst_holdout_ratio=holdout,
        passed=bool(fixed <= 1e-10 and holdout <= 2.0),
    )


def lambda_sweep(
    op: DiscretizedOperator, us: Sequence[float], thetas: Sequence[float] = (0.0,), tol: float = 1e-12
) -> List[SpectralSummary]:
    """Leading eigenvalue of R(exp(-u + i theta)); theta != 0 rows are diagnostics only."""
    out = []
    start = None
    for theta in thetas:
        for u in us:
            z = complex(math.exp(-u) * math.cos(theta), math.exp(-u) * math.sin(theta))
            if theta == 0.0:
                z = complex(math.exp(-u), 0.0)
            sd = leading_eigen(perturbed_operator(op, z), tol=tol, start=start, z=z)
            start = sd.right if theta == 0.0 else None
            out.append(sd.summary())
    return out


def eigenvalue_asymptotics(
    op: DiscretizedOperator,
    us: Sequence[float],
    beta: float,
    c_hat: float,
    reference_u: float = 1e-3,
    tol: float = 1e-12,
) -> EigenAsymptoticReport:
    """
    Regress log(1 - lambda(e^-u)) on log u and compare the prefactor with Gamma(1 - beta) c_hat.
    """
    us = sorted(float(u) for u in us)
    gaps = []
    start = None
    for u in us:
        sd = leading_eigen(perturbed_operator(op, complex(math.exp(-u), 0.0)), tol=tol, start=start)
        start = sd.right
        gaps.append(1.0 - float(np.real(sd.lam)))
    fit = loglog_fit(np.asarray(us), np.asarray(gaps))
    ref = min(us, key=lambda u: abs(math.log(u / reference_u)))
    one_minus = gaps[us.index(ref)]
    report = EigenAsymptoticReport(
        us=us,
        one_minus_lambda=gaps,
        slope=fit.slope,
        slope_stderr=fit.slope_stderr,
        beta=beta,
        prefactor=one_minus / ref**beta,
        prefactor_target=float(special.gamma(1.0 - beta)) * c_hat,
        reference_u=ref,
    )
    logger.info("Eigenvalue asymptotics: slope %.4f (beta %.4f)", report.slope, beta)
    return report


def refinement_check(
    spec: IntervalMapSpec,
    partition: ReturnPartition,
    m: int,
    u: float = 1e-3,
    exact_levels: Optional[int] = None,
    tolerance: float = 1e-3,
) -> RefinementReport:
    """Change of lambda(e^-u) when the grid is doubled from m to 2m cells."""
    lams = []
    for size in (m, 2 * m):
        op = split_by_return_time(
            build_induced_operator(spec, partition, Grid(size), exact_levels=exact_levels), partition
        )
        sd = leading_eigen(perturbed_operator(op, complex(math.exp(-u), 0.0)))
        lams.append(float(np.real(sd.lam)))
    return RefinementReport(
        m_coarse=m, m_fine=2 * m, u=u, lambda_coarse=lams[0], lambda_fine=lams[1], tolerance=tolerance
    )


def slice_mass_decay(op: DiscretizedOperator, window: Tuple[int, int] = (100, 10_000)) -> SliceDecayReport:
    """
    Log-log slope of the slice masses against n.

    The Lebesgue mass |Y_n| carried by R_n is the primary series; the largest
    column sum is reported alongside and fluctuates when Y_n straddles grid cells.
    """
    if op.slices is None:
        raise DomainError("split_by_return_time must run before slice_mass_decay")
    lo, hi = window
    hi = min(hi, op.n_max)
    ns = log_grid(lo, hi, 200)
    mass = op.ledger.level_mass[ns]
    colmax = op.ledger.level_colmax[ns]
    keep = (mass > 0) & (colmax > 0)
    fit = loglog_fit(ns[keep], mass[keep])
    col_fit = loglog_fit(ns[keep], colmax[keep])
    return SliceDecayReport(
        window=(int(lo), int(hi)),
        slope=fit.slope,
        slope_stderr=fit.slope_stderr,
        column_slope=col_fit.slope,
        identity_error=op.slices.identity_error,
    )


def occupation_histogram(
    spec: IntervalMapSpec, grid: Grid, orbits: int, steps: int, seed: int, burn_in: int = 100
) -> np.ndarray:
    """Normalized grid histogram of the visits of raw f0 orbits to Y (an F0-orbit oracle)."""
    rng = np.random.default_rng(seed)
    x = 0.5 + 0.5 * (1.0 - rng.random(orbits))
    counts = np.zeros(grid.M)
    for k in range(burn_in + steps):
        x = spec.apply(x)
        x[x == 0.0] = rng.random(int(np.count_nonzero(x == 0.0)))
        if k >= burn_in:
            inside = x[x > 0.5]
            counts += np.bincount(grid.locate(inside), minlength=grid.M)
    total = counts.sum()
    if total == 0:
        raise DomainError("no orbit visited Y")
    return counts / total
