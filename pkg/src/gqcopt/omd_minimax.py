"""Regularized optimistic mirror descent for minimax problems over products of simplexes.

A tensor Q^t tracks the fixed point of a contraction P while both players
run entropy-regularized optimistic updates against operator values at Q.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, InvariantViolation, ScheduleError
from .oracles import InternalOperator
from .simplex_core import ProductDistribution, product_prox
from .trace import RunTrace


@dataclass(frozen=True)
class MinimaxSchedule:
    """Step size and weight sequences.

    Arrays are indexed by t with entry 0 unused except ``beta[0] = 1``. The
    averaging weights ``alpha`` are renormalized to sum to one. ``gamma_t``
    depends only on t, so the run is the same for every horizon.
    """

    T: int
    theta: float
    c: float
    eta: float
    eta_cap: Optional[float]
    L1: Optional[float]
    L2: Optional[float]
    gamma: Optional[float]
    outside_theory: bool
    beta: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    gamma_t: np.ndarray = field(repr=False)
    lambda_t: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {"T": self.T, "theta": self.theta, "c": self.c, "eta": self.eta,
                "eta_cap": self.eta_cap, "L1": self.L1, "L2": self.L2, "gamma": self.gamma,
                "outside_theory": self.outside_theory}


def minimax_eta_cap(theta: float, L1: float, L2: float, gamma: float) -> float:
    """(1-theta)^(1/2) / (16 L2 ((gamma L1)^(1/2) + 1))."""
    if L2 <= 0 or L1 < 0 or gamma < 0:
        raise ScheduleError("need L2 > 0 and non-negative L1, gamma")
    return math.sqrt(1 - theta) / (16 * L2 * (math.sqrt(gamma * L1) + 1))


def minimax_schedule(T: int, theta: float, L1: Optional[float] = None, L2: Optional[float] = None,
                     gamma_const: Optional[float] = None, eta: Optional[float] = None) -> MinimaxSchedule:
    """Build the schedule with c = 2/(1-theta), beta_t = c/(c+t), alpha_t = beta_{T,t}.

    With all of L1, L2, gamma_const the step defaults to the theory cap.
    Without them the step defaults to (1-theta)^(1/2)/32 and the run is
    flagged outside theory, as is any ``eta`` above the cap.
    """
    if not 0.0 <= theta < 1.0:
        raise ScheduleError("theta must lie in [0, 1)")
    if T < 1:
        raise ScheduleError("T must be positive")
    c = 2.0 / (1.0 - theta)
    known = L1 is not None and L2 is not None and gamma_const is not None
    cap = minimax_eta_cap(theta, L1, L2, gamma_const) if known else None
    if eta is None:
        step = cap if known else math.sqrt(1 - theta) / 32
        outside = not known
    else:
        if eta <= 0:
            raise ScheduleError("eta must be positive")
        step = float(eta)
        outside = not known or step > cap
    t = np.arange(0, T + 1, dtype=np.float64)
    beta = c / (c + t)
    log1m = np.log1p(-beta[1:])
    tail = np.concatenate([np.cumsum(log1m[::-1])[::-1][1:], [0.0]])
    log_alpha = np.log(beta[1:]) + tail
    raw = np.exp(log_alpha - log_alpha.max())
    alpha = np.concatenate([[np.nan], raw / raw.sum()])
    gamma_t = np.concatenate([[np.nan], t[1:] / (c + t[1:] - 1)])
    lambda_t = 1.0 - gamma_t
    return MinimaxSchedule(int(T), float(theta), c, step, cap, L1, L2, gamma_const, outside,
                           beta, alpha, gamma_t, lambda_t)


@dataclass
class PTensorMap:
    """Contraction ``evaluate(Q, x, y) -> Q'`` with factor ``theta`` and sup-norm bound ``C``."""

    evaluate: Callable
    shape: tuple
    theta: float
    C: float

    def __call__(self, Q, x, y) -> np.ndarray:
        out = np.asarray(self.evaluate(Q, x, y), dtype=np.float64)
        if out.shape != tuple(self.shape):
            raise DomainError(f"P returned shape {out.shape}, expected {tuple(self.shape)}")
        return out


def q_update(Q_prev, x_prev, y_prev, p: PTensorMap, beta_prev: float) -> np.ndarray:
    """(1 - beta) Q_prev + beta P(Q_prev, z_prev)."""
    if not 0.0 <= beta_prev <= 1.0:
        raise DomainError("beta must lie in [0, 1]")
    Q_prev = np.asarray(Q_prev, dtype=np.float64)
    PQ = p(Q_prev, x_prev, y_prev)
    if PQ.shape != Q_prev.shape:
        raise DomainError("Q and P(Q, z) have different shapes")
    return (1.0 - beta_prev) * Q_prev + beta_prev * PQ


@dataclass(frozen=True)
class OmdMinimaxState:
    x: ProductDistribution
    y: ProductDistribution
    log_gx: np.ndarray
    log_gy: np.ndarray
    Q: np.ndarray
    Fx: np.ndarray
    Fy: np.ndarray
    t: int


def initial_minimax_state(operator: InternalOperator, p: PTensorMap) -> OmdMinimaxState:
    """Q^0 = 0 and uniform z^0 = g^0. Evaluates the operator once at (Q^0, z^0)."""
    x = ProductDistribution.uniform(operator.sizes_x)
    y = ProductDistribution.uniform(operator.sizes_y)
    Q = np.zeros(p.shape)
    fx, fy = operator(Q, x, y)
    return OmdMinimaxState(x, y, np.log(x.flat), np.log(y.flat), Q, fx, fy, 0)


def minimax_step(state: OmdMinimaxState, operator: InternalOperator, p: PTensorMap,
                 schedule: MinimaxSchedule) -> OmdMinimaxState:
    """One iteration. The cached operator values in ``state`` are at (Q^{t-1}, z^{t-1})."""
    t = state.t + 1
    if t > schedule.T:
        raise ScheduleError(f"step {t} is past the horizon {schedule.T}")
    eta, gam, lam = schedule.eta, schedule.gamma_t[t], schedule.lambda_t[t]
    Q = q_update(state.Q, state.x, state.y, p, schedule.beta[t - 1])
    ox, oy = state.x.offsets, state.y.offsets
    _, xf = product_prox(state.log_gx, state.Fx, ox, eta, gam, lam)
    _, yf = product_prox(state.log_gy, state.Fy, oy, eta, gam, lam)
    x = ProductDistribution(xf, ox, validate=False)
    y = ProductDistribution(yf, oy, validate=False)
    fx, fy = operator(Q, x, y)
    lgx, _ = product_prox(state.log_gx, fx, ox, eta, gam, lam)
    lgy, _ = product_prox(state.log_gy, fy, oy, eta, gam, lam)
    return OmdMinimaxState(x, y, lgx, lgy, Q, fx, fy, t)


@dataclass
class MinimaxResult:
    x_bar: ProductDistribution
    y_bar: ProductDistribution
    trace: RunTrace
    final: OmdMinimaxState
    checkpoints: list
    gaps: list
    q_errors: list


def default_checkpoints(T: int) -> list:
    every = max(1, T // 100)
    marks = list(range(every, T + 1, every))
    if marks[-1] != T:
        marks.append(T)
    return marks


def run_minimax(operator: InternalOperator, p: PTensorMap, schedule: MinimaxSchedule, *,
                gap_eval: Optional[Callable] = None, q_star: Optional[np.ndarray] = None,
                checkpoints: Optional[list] = None, seed: int = 0) -> MinimaxResult:
    """Run ``schedule.T`` steps and return the alpha-weighted average of the iterates.

    The average is accumulated as S_t = (1-beta_t) S_{t-1} + beta_t z^t with
    matching mass m_t, so S_t/m_t at any checkpoint t is exactly the output a
    run with horizon t would return. ``gap_eval(x_bar, y_bar)`` is evaluated
    at the checkpoints, as is |Q^t - Q*|_inf when ``q_star`` is given.
    ``seed`` is recorded in the metadata only; the run is deterministic.
    """
    T = schedule.T
    marks = set(default_checkpoints(T) if checkpoints is None else checkpoints)
    meta = {"algorithm": "omd-minimax", "seed": seed, "theory_mode": not schedule.outside_theory}
    meta["schedule"] = schedule.as_dict()
    trace = RunTrace(metadata=meta)
    flag = "outside-theory" if schedule.outside_theory else ""
    state = initial_minimax_state(operator, p)
    Sx = np.zeros_like(state.x.flat)
    Sy = np.zeros_like(state.y.flat)
    mass = 0.0
    done_marks, gaps, q_errors = [], [], []
    cap = p.C * (1 + 1e-12) if p.C is not None else None
    for _ in range(T):
        Q_prev = state.Q
        state = minimax_step(state, operator, p, schedule)
        t = state.t
        if cap is not None and np.max(np.abs(state.Q)) > cap:
            raise InvariantViolation(f"step {t}: |Q|_inf exceeds the declared bound {p.C}")
        b = schedule.beta[t]
        Sx = (1 - b) * Sx + b * state.x.flat
        Sy = (1 - b) * Sy + b * state.y.flat
        mass = (1 - b) * mass + b
        q_step = float(np.max(np.abs(state.Q - Q_prev)))
        gap = math.nan
        if t in marks:
            done_marks.append(t)
            if gap_eval is not None:
                xb, yb = _average(Sx, Sy, mass, state)
                gap = float(gap_eval(xb, yb))
                gaps.append(gap)
            if q_star is not None:
                q_errors.append(float(np.max(np.abs(state.Q - q_star))))
        trace.append(t, gap=gap, q_step=q_step, flags=flag)
    xb, yb = _average(Sx, Sy, mass, state)
    return MinimaxResult(xb, yb, trace, state, done_marks, gaps, q_errors)


def _average(Sx, Sy, mass, state):
    x = ProductDistribution(_renormalize(Sx / mass, state.x.offsets), state.x.offsets, validate=False)
    y = ProductDistribution(_renormalize(Sy / mass, state.y.offsets), state.y.offsets, validate=False)
    return x, y


def _renormalize(flat, offsets):
    sums = np.add.reduceat(flat, offsets[:-1])
    if np.any(np.abs(sums - 1.0) > 1e-10):
        raise InvariantViolation("averaged block drifted from the simplex")
    return flat / np.repeat(sums, np.diff(offsets))
