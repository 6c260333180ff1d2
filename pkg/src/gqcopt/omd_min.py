"""Optimistic mirror descent over a product of simplexes (minimization).

Each block runs the two-sequence optimistic update
``x^t = prox(g^{t-1}, F(x^{t-1}))`` and ``g^t = prox(g^{t-1}, F(x^t))``,
so only one fresh oracle call is needed per step.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvariantViolation, ScheduleError
from .oracles import InternalFunction
from .simplex_core import ProductDistribution, product_prox
from .trace import RunTrace

GAMMA_COEF = 322560.0
ETA_CAP_COEF = 57792.0


@dataclass(frozen=True)
class MinSchedule:
    """Adaptive step size for internal functions with decaying finite differences."""

    T: int
    Theta1: float
    Theta2: float
    K0: float
    theta: float
    Theta: float
    H: int
    beta0: float
    beta: float
    Gamma: float
    K_hat: float
    eta: float

    def as_dict(self) -> dict:
        return asdict(self)


def min_schedule_adaptive(T: int, Theta1: float, Theta2: float, K0: float, theta: float) -> MinSchedule:
    if T < 4:
        raise ScheduleError("the adaptive schedule needs T >= 4")
    if Theta1 < 0 or Theta2 < 0:
        raise ScheduleError("Theta1 and Theta2 must be non-negative")
    if K0 < 1:
        raise ScheduleError("K0 must be at least 1")
    if not 0.0 <= theta <= 1.0:
        raise ScheduleError("theta must lie in [0, 1]")
    if theta == 1.0 and Theta1 > 0:
        raise ScheduleError("theta = 1 with Theta1 > 0 leaves K_hat undefined")
    Theta = Theta1 + Theta2 + 1.0
    H = math.ceil(math.log(T))
    beta0 = 1.0 / (4 * H)
    beta = min(math.sqrt(beta0 / 8) / H**3, 1.0 / (2 * Theta * (H + 3)))
    Gamma = math.e**2 + GAMMA_COEF * Theta2
    if Theta1 == 0 or theta == 0:
        # the Taylor-remainder term vanishes
        K_hat = float(K0)
    else:
        K_hat = max((H * math.log(4 / beta) + math.log(Theta1)) / math.log(1 / theta), float(K0))
    eta = min(beta / (6 * math.e**3 * K_hat * Gamma * max(Theta, 1.0)),
              beta0**4 / (ETA_CAP_COEF * Theta))
    return MinSchedule(int(T), float(Theta1), float(Theta2), float(K0), float(theta),
                       Theta, H, beta0, beta, Gamma, K_hat, eta)


def min_schedule_lipschitz(L: float, d: int, gammas) -> float:
    """Step for L-Lipschitz internal functions: (L^2 d gamma_max sum 1/gamma_i)^(-1/2) / 2."""
    gammas = np.asarray(gammas, dtype=np.float64)
    if gammas.size == 0:
        raise ScheduleError("need at least one gamma")
    if L <= 0 or np.any(gammas <= 0):
        raise ScheduleError("L and every gamma must be positive")
    return 0.5 / math.sqrt(L**2 * d * gammas.max() * np.sum(1.0 / gammas))


@dataclass(frozen=True)
class OmdMinState:
    x: ProductDistribution
    log_x: np.ndarray
    log_g: np.ndarray
    F_prev: np.ndarray
    t: int

    @property
    def g(self) -> ProductDistribution:
        return ProductDistribution(np.exp(self.log_g), self.x.offsets, validate=False)


def initial_min_state(oracle: InternalFunction, *, check: bool = False) -> OmdMinState:
    """Uniform start. Evaluates F(x^0) once."""
    x0 = oracle.initial_point()
    log_x = np.log(x0.flat)
    return OmdMinState(x0, log_x, log_x.copy(), oracle(x0, check=check), 0)


def min_step(state: OmdMinState, oracle: InternalFunction, eta: float, *,
             check: bool = False) -> OmdMinState:
    off = state.x.offsets
    log_x, x = product_prox(state.log_g, state.F_prev, off, eta)
    x_new = ProductDistribution(x, off, validate=False)
    F_new = oracle(x_new, check=check)
    log_g, _ = product_prox(state.log_g, F_new, off, eta)
    return OmdMinState(x_new, log_x, log_g, F_new, state.t + 1)


def _block_log_ratio(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)))


@dataclass
class MinResult:
    chosen: ProductDistribution
    chosen_index: int
    trace: RunTrace
    final: OmdMinState
    best_value: float
    iterates: Optional[list] = None
    oracle_values: Optional[list] = None


def run_min(oracle: InternalFunction, schedule: Optional[MinSchedule] = None, *,
            T: Optional[int] = None, eta: Optional[float] = None,
            f_eval: Optional[Callable] = None, rng_seed: int = 0, debug: bool = False,
            keep_iterates: bool = False) -> MinResult:
    """Run T steps from the uniform start and sample the output iterate uniformly.

    ``eta`` overrides the schedule step and marks the run outside theory.
    With ``debug`` the oracle bound is checked at every call, and under the
    theory step consecutive iterates are checked for 7*eta*(Theta1+Theta2)
    closeness.
    """
    if schedule is None and eta is None:
        raise ScheduleError("need a schedule or an explicit eta")
    if T is None:
        if schedule is None:
            raise ScheduleError("need T when no schedule is given")
        T = schedule.T
    if T < 1:
        raise ScheduleError("T must be positive")
    outside = eta is not None and (schedule is None or eta != schedule.eta)
    step = float(eta if eta is not None else schedule.eta)
    f = f_eval if f_eval is not None else oracle.objective

    rng = np.random.Generator(np.random.Philox(rng_seed))
    pick = int(rng.integers(1, T + 1))

    meta = {"algorithm": "omd-min", "seed": rng_seed, "T": T, "eta": step,
            "theory_mode": not outside, "chosen_index": pick}
    if schedule is not None:
        meta["schedule"] = schedule.as_dict()
    trace = RunTrace(metadata=meta)
    zeta_cap = None
    if debug and not outside and schedule is not None:
        zeta_cap = 7 * step * (schedule.Theta1 + schedule.Theta2)

    state = initial_min_state(oracle, check=debug)
    iterates = [state.x] if keep_iterates else None
    values = [state.F_prev] if keep_iterates else None
    chosen = state.x
    best = math.inf
    flag = "outside-theory" if outside else ""
    for _ in range(T):
        prev_log = state.log_x
        state = min_step(state, oracle, step, check=debug)
        if zeta_cap is not None and state.t > 1:
            zeta = math.expm1(_block_log_ratio(state.log_x, prev_log))
            if zeta > zeta_cap * (1 + 1e-9):
                raise InvariantViolation(
                    f"step {state.t}: consecutive ratio gap {zeta:.3e} exceeds {zeta_cap:.3e}")
        value = float(f(state.x)) if f is not None else math.nan
        if value < best:
            best = value
        trace.append(state.t, value=value, flags=flag)
        if state.t == pick:
            chosen = state.x
        if keep_iterates:
            iterates.append(state.x)
            values.append(state.F_prev)
    return MinResult(chosen, pick, trace, state, best, iterates, values)
