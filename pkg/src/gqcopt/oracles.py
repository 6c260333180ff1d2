"""Internal-function oracles, quasar-convexity certificates and a matrix-game solver."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Optional

import numpy as np

from ._backend import kernels
from .errors import DomainError, OracleNonConvergence
from .simplex_core import ProductDistribution

POLISH_AFTER = 200_000


@dataclass(frozen=True)
class GqcConstants:
    """Constants feeding the adaptive step-size schedule.

    ``Theta1``, ``theta`` and ``K0`` describe how fast high-order finite
    differences of F decay, ``Theta2`` bounds first-order smoothness.
    """

    Theta1: float
    Theta2: float
    K0: float
    theta: float


@dataclass
class InternalFunction:
    """A map from a product distribution to one cost vector per block.

    ``evaluate`` returns F(x) flattened in the block layout of ``x``.
    ``theta_bound`` is a sup-norm bound on F, checked when ``check=True``.
    ``objective`` optionally evaluates f(x), sharing work with ``evaluate``.
    """

    sizes: np.ndarray
    evaluate: Callable[[ProductDistribution], np.ndarray]
    theta_bound: Optional[float] = None
    constants: Optional[GqcConstants] = None
    objective: Optional[Callable[[ProductDistribution], float]] = None
    n_evals: int = field(default=0, init=False)

    def __post_init__(self):
        self.sizes = np.asarray(self.sizes, dtype=np.int64)

    def initial_point(self) -> ProductDistribution:
        return ProductDistribution.uniform(self.sizes)

    def __call__(self, x: ProductDistribution, *, check: bool = False) -> np.ndarray:
        out = np.asarray(self.evaluate(x), dtype=np.float64)
        self.n_evals += 1
        if out.shape != x.flat.shape:
            raise DomainError(f"oracle returned shape {out.shape}, expected {x.flat.shape}")
        if check and self.theta_bound is not None:
            m = float(np.max(np.abs(out)))
            if m > self.theta_bound * (1 + 1e-12):
                raise DomainError(f"|F(x)|_inf = {m} exceeds declared bound {self.theta_bound}")
        return out


@dataclass
class InternalOperator:
    """Joint oracle for the minimax setting.

    ``evaluate(Q, x, y)`` returns the flat pair ``(F^x, F^y)``. Player x
    minimizes and player y maximizes, so ``F^y`` already carries the sign
    flip and both players run the same descent step.
    """

    sizes_x: np.ndarray
    sizes_y: np.ndarray
    evaluate: Callable
    n_evals: int = field(default=0, init=False)

    def __post_init__(self):
        self.sizes_x = np.asarray(self.sizes_x, dtype=np.int64)
        self.sizes_y = np.asarray(self.sizes_y, dtype=np.int64)

    def __call__(self, Q, x, y):
        self.n_evals += 1
        fx, fy = self.evaluate(Q, x, y)
        return np.asarray(fx, dtype=np.float64).ravel(), np.asarray(fy, dtype=np.float64).ravel()


def random_product_distribution(sizes, rng, concentration=1.0) -> ProductDistribution:
    """Independent Dirichlet(concentration) block draws."""
    blocks = [rng.dirichlet(np.full(int(n), concentration)) for n in sizes]
    return ProductDistribution.from_blocks(blocks)


@dataclass(frozen=True)
class GqcReport:
    """``worst_slack`` is the most negative f(x*) - f(x) - sum_i w_i <F_i(x), x*_i - x_i>."""

    holds: bool
    worst_slack: float
    max_abs_slack: float
    n_samples: int
    seed: Optional[int]

    @property
    def worst_violation(self) -> float:
        return max(0.0, -self.worst_slack)


def check_gqc(f, F: InternalFunction, x_star: ProductDistribution, weights, samples=100, *,
              tol: float = 1e-8, seed: int = 0, concentrations=(1.0, 0.2)) -> GqcReport:
    """Test f(x*) >= f(x) + sum_i w_i <F_i(x), x*_i - x_i> at sample points.

    ``weights`` are the 1/gamma_i. ``samples`` is either a list of points or
    a count; counted samples are independent Dirichlet block draws cycling
    through ``concentrations`` so near-deterministic points are covered.
    ``max_abs_slack`` is small exactly when the relation is an equality.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (x_star.n_blocks,):
        raise DomainError("need one weight per block")
    if np.any(weights < 0):
        raise DomainError("weights must be non-negative")
    if isinstance(samples, (int, np.integer)):
        rng = np.random.default_rng(seed)
        points = (random_product_distribution(F.sizes, rng, concentrations[k % len(concentrations)])
                  for k in range(samples))
        n = int(samples)
    else:
        points = list(samples)
        n = len(points)
        seed = None
    starts = x_star.offsets[:-1]
    f_star = float(f(x_star))
    worst = math.inf
    biggest = 0.0
    for x in points:
        if not x.same_shape(x_star):
            raise DomainError("sample block shapes differ from x*")
        inner = np.add.reduceat(F(x) * (x_star.flat - x.flat), starts)
        slack = f_star - float(f(x)) - float(weights @ inner)
        worst = min(worst, slack)
        biggest = max(biggest, abs(slack))
    if n == 0:
        worst = 0.0
    return GqcReport(worst >= -tol, worst, biggest, n, seed)


@dataclass(frozen=True)
class GqccReport:
    holds: bool
    worst_violation: float
    max_psi_sum: float
    n_samples: int
    seed: int


def check_gqcc(sample, *, samples: int = 100, tol: float = 1e-8, seed: int = 0) -> GqccReport:
    """Test the minimax analogue on random joint points.

    ``sample(rng)`` draws a joint point and returns ``(gap, block_gaps, psi)``:
    the global gap, the per-block gaps ``max_x' <F_i, .> - min_y' <F_i, .>``
    at Q*, and the nonnegative weights psi_i. The relation checked is
    ``gap <= sum_i psi_i * block_gap_i``.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    psi_max = 0.0
    for _ in range(samples):
        gap, block_gaps, psi = sample(rng)
        psi = np.asarray(psi, dtype=np.float64)
        if np.any(psi < 0):
            raise DomainError("psi weights must be non-negative")
        worst = max(worst, float(gap) - float(psi @ np.asarray(block_gaps)))
        psi_max = max(psi_max, float(psi.sum()))
    return GqccReport(worst <= tol, worst, psi_max, samples, seed)


def duality_gap(A, x, y) -> float:
    """max_j (x^T A)_j - min_k (A y)_k for the cost matrix ``A``."""
    A = np.asarray(A, dtype=np.float64)
    return float(np.max(x @ A) - np.min(A @ y))


@dataclass(frozen=True)
class MatrixGameSolution:
    x: np.ndarray
    y: np.ndarray
    value: float
    gap: float
    iterations: int
    warm_start: tuple


def default_omwu_eta(A) -> float:
    """Step scaled to the spread of A; the dynamics ignore constant shifts of A."""
    spread = float(np.max(A) - np.min(A))
    return 1.0 / spread if spread > 0 else 1.0


def _support_equilibrium(A, I, J):
    """Equalizing strategies on supports I (rows) and J (columns) of equal size, or None."""
    k = len(I)
    B = A[np.ix_(I, J)]
    M = np.zeros((k + 1, k + 1))
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    try:
        M[:k, :k], M[:k, k], M[k, :k] = B.T, -1.0, 1.0
        xs = np.linalg.solve(M, rhs)[:k]
        M[:k, :k] = B
        ys = np.linalg.solve(M, rhs)[:k]
    except np.linalg.LinAlgError:
        return None
    if xs.min() < -1e-12 or ys.min() < -1e-12:
        return None
    x = np.zeros(A.shape[0])
    y = np.zeros(A.shape[1])
    x[list(I)] = np.maximum(xs, 0.0)
    y[list(J)] = np.maximum(ys, 0.0)
    return x / x.sum(), y / y.sum()


def _polish(A, x, y, enumerate_limit=6):
    """Exact equilibrium candidates from the supports of an approximate one.

    Tries the supports of ``(x, y)`` at a few thresholds, then, for games
    with at most ``enumerate_limit`` rows or columns, every pair of equal-size
    supports. Returns the best ``(x, y, gap)`` found, or None.
    """
    best = None

    def consider(I, J):
        nonlocal best
        sol = _support_equilibrium(A, I, J)
        if sol is not None:
            gap = duality_gap(A, *sol)
            if best is None or gap < best[2]:
                best = (sol[0], sol[1], gap)

    for thr in (1e-2, 1e-3, 1e-4, 1e-6):
        I = np.flatnonzero(x > thr * x.max())
        J = np.flatnonzero(y > thr * y.max())
        if len(I) == len(J):
            consider(I, J)
    if min(A.shape) <= enumerate_limit:
        for k in range(1, min(A.shape) + 1):
            for I in combinations(range(A.shape[0]), k):
                for J in combinations(range(A.shape[1]), k):
                    consider(I, J)
                    if best is not None and best[2] <= 1e-14:
                        return best
    return best


def solve_matrix_game(A, *, tol: float = 1e-8, max_iters: int = 2_000_000,
                      eta: Optional[float] = None, warm_start=None,
                      check_every: int = 10, raise_on_failure: bool = True) -> MatrixGameSolution:
    """Approximate equilibrium of the zero-sum game with cost matrix ``A``.

    The row player minimizes. Games with a single row or column are solved
    exactly. Otherwise optimistic multiplicative weights run until the exact
    duality gap of either the last or the averaged iterate is below ``tol``.
    If a first short run stalls, an exact support solve seeded by the current
    iterate is tried before the remaining iterations are spent.
    ``warm_start`` is the ``warm_start`` field of an earlier solution and
    restarts from its prox centers.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    if A.ndim != 2 or A.size == 0:
        raise DomainError("A must be a non-empty matrix")
    n, m = A.shape
    if n == 1 or m == 1:
        if n == 1:
            x = np.ones(1)
            y = np.zeros(m)
            y[int(np.argmax(A[0]))] = 1.0
        else:
            y = np.ones(1)
            x = np.zeros(n)
            x[int(np.argmin(A[:, 0]))] = 1.0
        return MatrixGameSolution(x, y, float(x @ A @ y), 0.0, 0, (np.zeros(n), np.zeros(m)))
    if eta is None:
        eta = default_omwu_eta(A)
    lgx, lgy = warm_start if warm_start is not None else (np.zeros(n), np.zeros(m))
    first = min(int(max_iters), POLISH_AFTER)
    x, y, gap, iters, lgx, lgy, ok = kernels.omwu_solve(
        A, float(eta), float(tol), first, int(check_every), lgx, lgy)
    if not ok:
        polished = _polish(A, x, y)
        if polished is not None and polished[2] <= tol:
            x, y, gap = polished
            ok = True
        elif max_iters > first:
            x2, y2, gap2, more, lgx, lgy, ok = kernels.omwu_solve(
                A, float(eta), float(tol), int(max_iters) - first, int(check_every), lgx, lgy)
            iters += more
            if gap2 < gap:
                x, y, gap = x2, y2, gap2
    if not ok and raise_on_failure:
        raise OracleNonConvergence(
            f"matrix game solver reached {max_iters} iterations with gap {gap:.3e} > {tol:.1e}",
            best_gap=gap, iterations=iters)
    return MatrixGameSolution(x, y, float(x @ A @ y), float(gap), int(iters), (lgx, lgy))
