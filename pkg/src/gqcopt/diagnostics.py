"""Finite differences, shifts, consecutive closeness and convergence-bound calculators."""
from __future__ import annotations

import math
from math import comb

import numpy as np

from .errors import DomainError, ScheduleError
from .simplex_core import ProductDistribution

BOUND_MIN_COEF = 330240.0


def as_sequence(seq) -> np.ndarray:
    """Stack L^0..L^T into a (T+1, n) array. ProductDistributions contribute their flat arrays."""
    rows = [s.flat if isinstance(s, ProductDistribution) else np.asarray(s, dtype=np.float64).ravel()
            for s in seq]
    if not rows:
        raise DomainError("sequence is empty")
    n = rows[0].size
    if any(r.size != n for r in rows):
        raise DomainError("sequence vectors have different lengths")
    return np.vstack(rows)


def _neumaier_sum(terms: np.ndarray) -> np.ndarray:
    """Compensated sum over axis 0."""
    s = np.zeros(terms.shape[1:])
    comp = np.zeros_like(s)
    for x in terms:
        t = s + x
        big = np.abs(s) >= np.abs(x)
        comp += np.where(big, (s - t) + x, (x - t) + s)
        s = t
    return s + comp


def finite_difference(seq, h: int) -> np.ndarray:
    """Order-h forward difference (D_h L)^t for t = 0..T-h.

    Orders below 4 use repeated differencing. Higher orders use the binomial
    closed form with compensated summation to limit cancellation.
    """
    L = as_sequence(seq)
    T = L.shape[0] - 1
    if h < 0 or h > T:
        raise DomainError(f"order {h} needs 0 <= h <= T={T}")
    if h < 4:
        out = L
        for _ in range(h):
            out = out[1:] - out[:-1]
        return out
    n_out = T - h + 1
    terms = np.stack([comb(h, s) * (-1) ** (h - s) * L[s:s + n_out] for s in range(h + 1)])
    return _neumaier_sum(terms)


def shift(seq, s: int) -> np.ndarray:
    """(E_s L)^t = L^{t+s}."""
    L = as_sequence(seq)
    if s < 0 or s > L.shape[0] - 1:
        raise DomainError(f"shift {s} exceeds the sequence length")
    return L[s:]


def consecutive_closeness(seq) -> float:
    """Smallest zeta with max{|p^t/p^{t+1}|_inf, |p^{t+1}/p^t|_inf} <= 1 + zeta for all t."""
    L = as_sequence(seq)
    if np.any(L <= 0):
        raise DomainError("consecutive closeness needs strictly positive vectors")
    if L.shape[0] < 2:
        return 0.0
    return float(max(np.max(L[1:] / L[:-1]), np.max(L[:-1] / L[1:])) - 1.0)


def finite_difference_bound(beta: float, h: int) -> float:
    """beta^h h^(3h+1), the decay the adaptive schedule guarantees for D_h F."""
    return beta**h * h ** (3 * h + 1)


def bound_min(schedule, N: int, weight_sum: float, T: int | None = None) -> float:
    """(sum 1/gamma_i) [log(N)/eta + eta Theta^3 (6 + 330240 Theta H^5)] / T."""
    T = schedule.T if T is None else T
    eta, Th, H = schedule.eta, schedule.Theta, schedule.H
    return weight_sum * (math.log(N) / eta + eta * Th**3 * (6 + BOUND_MIN_COEF * Th * H**5)) / T


def _require_constants(schedule):
    if schedule.L1 is None or schedule.L2 is None or schedule.gamma is None:
        raise ScheduleError("schedule lacks the Lipschitz constants L1, L2 and gamma")


def minimax_Y(schedule, M: int, C: float, *, form: str = "appendix", T: int | None = None,
              A: float = 2.0) -> float:
    """The Q-tracking error term Y_T.

    ``form="appendix"`` is the general version with D = 2 log M and the
    Bregman constant A (2 for entropy). ``form="main"`` is the simplified
    main-text version.
    """
    _require_constants(schedule)
    T = schedule.T if T is None else T
    c, eta = schedule.c, schedule.eta
    L1, L2, g = schedule.L1, schedule.L2, schedule.gamma
    growth = math.log(c + T) + 1.0
    if form == "appendix":
        D = 2.0 * math.log(M)
        inner = (g * D * (1.0 / eta + 16 * eta * L2)
                 + 40 * eta**3 * g * A**2 * L2**4
                 + 2 * eta * g * L1**2 * (1 + 64 * eta**2 * L2**2 * C**2))
    elif form == "main":
        inner = (4 * g / eta * math.log(M) + 160 * g * L2
                 + 2 * eta * g * L1**2 * (1 + 64 * C**2))
    else:
        raise ValueError(f"unknown form {form!r}")
    return 8 * (c + 1) * inner * growth


def _minimax_rhs(schedule, M, psi_sum_max, Y, T):
    eta, L1 = schedule.eta, schedule.L1
    return 60 * psi_sum_max / (1 - schedule.theta) * (
        2 / eta * math.log(M) + eta * L1**2 + L1 * Y) / T


def bound_minimax(schedule, M: int, psi_sum_max: float, C: float, T: int | None = None) -> float:
    """60 max(sum psi)(1-theta)^-1 (2/eta log M + eta L1^2 + L1 Y_T) / T, appendix Y_T."""
    T = schedule.T if T is None else T
    Y = minimax_Y(schedule, M, C, form="appendix", T=T)
    return _minimax_rhs(schedule, M, psi_sum_max, Y, T)


def minimax_bound_report(schedule, M: int, psi_sum_max: float, C: float) -> dict:
    """Both forms of Y_T, the bound each gives, and the general (T+3)-denominator form."""
    T = schedule.T
    Y_app = minimax_Y(schedule, M, C, form="appendix")
    Y_main = minimax_Y(schedule, M, C, form="main")
    eta, L1, L2, A = schedule.eta, schedule.L1, schedule.L2, 2.0
    D = 2.0 * math.log(M)
    general = (6 * psi_sum_max / (1 - schedule.theta)
               * (3 * D / eta + 10 * eta * L1**2 + 5 * A * L1 * Y_app + 4 * eta * A**2 * L2**2)
               / (T + 3))
    return {
        "bound_general": general,
        "Y_appendix": Y_app,
        "Y_main": Y_main,
        "bound": _minimax_rhs(schedule, M, psi_sum_max, Y_app, T),
        "bound_main_Y": _minimax_rhs(schedule, M, psi_sum_max, Y_main, T),
    }


def q_envelope(schedule, M: int, C: float, t: int) -> float:
    """(c/(c+t)) Y_t, the bound on |Q^t - Q*|_inf."""
    return schedule.c / (schedule.c + t) * minimax_Y(schedule, M, C, form="appendix", T=t)


def g_partial_sum(Gamma: float, K: int = 60) -> float:
    """sum_{k=1}^K Gamma^-k [k^7 + (k+1) e^(2k)]."""
    k = np.arange(1, K + 1, dtype=np.float64)
    log_g = math.log(Gamma)
    return float(np.sum(np.exp(7 * np.log(k) - k * log_g) + (k + 1) * np.exp(k * (2 - log_g))))


def g_series_bound(Gamma: float) -> float:
    """80640/(Gamma-1) + 2/(Gamma e^-2 - 1), valid for Gamma >= 17."""
    if Gamma < 17:
        raise DomainError("the bound needs Gamma >= 17")
    return 80640 / (Gamma - 1) + 2 / (Gamma * math.exp(-2) - 1)


def beta_weights(c: float, T: int) -> np.ndarray:
    """Raw beta_{T,t} = beta_t prod_{j>t} (1 - beta_j), t = 1..T, computed in log space."""
    t = np.arange(1, T + 1, dtype=np.float64)
    beta = c / (c + t)
    log1m = np.log1p(-beta)
    tail = np.concatenate([np.cumsum(log1m[::-1])[::-1][1:], [0.0]])
    return beta * np.exp(tail)


def beta_sandwich(c: float, T: int, c_prime: float | None = None):
    """Lower and upper envelopes of beta_{T,t} for t = 1..T."""
    cp = c if c_prime is None else c_prime
    t = np.arange(1, T + 1, dtype=np.float64)
    lower = math.exp(-((cp + cp * c) ** 2) / (2 * c)) * (c + t) ** (cp - 1) / (c + T) ** cp
    upper = (1 + c) * (c + t + 1) ** (cp - 1) / (c + T + 1) ** cp
    return lower, upper
