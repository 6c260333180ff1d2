"""Two-player zero-sum Markov games with (1-theta)-normalized values.

Player x picks actions in A and minimizes the discounted cost; player y
picks actions in B and maximizes it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import InstanceError
from .mdp import TabularMDP, _check_distribution, check_stochastic, policy_matrix, solve_mdp_exact, visitation_distribution
from .omd_minimax import PTensorMap, minimax_schedule
from .oracles import InternalOperator, random_product_distribution, solve_matrix_game
from .simplex_core import ProductDistribution

GAME_L1 = 2.0
GAME_L2 = 1.0
GAME_C = 1.0


@dataclass(frozen=True)
class ZeroSumMarkovGame:
    """``P`` has shape (S, A, B, S) and ``cost`` (S, A, B) with entries in [0, 1]."""

    P: np.ndarray
    cost: np.ndarray
    theta: float
    rho0: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64)
        cost = np.asarray(self.cost, dtype=np.float64)
        rho0 = np.asarray(self.rho0, dtype=np.float64)
        if P.ndim != 4 or P.shape[0] != P.shape[3] or cost.shape != P.shape[:3]:
            raise InstanceError(f"inconsistent shapes P{P.shape}, cost{cost.shape}")
        if rho0.shape != (P.shape[0],):
            raise InstanceError("rho0 must have one entry per state")
        if not 0.0 <= self.theta < 1.0:
            raise InstanceError(f"theta must lie in [0, 1), got {self.theta}")
        if np.any(cost < 0) or np.any(cost > 1):
            raise InstanceError("costs must lie in [0, 1]")
        check_stochastic(P, "(s,a,b)")
        _check_distribution(rho0, "rho0")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "rho0", rho0)
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def n_actions(self) -> tuple:
        return self.P.shape[1], self.P.shape[2]


def random_game(n_states: int, n_a: int, n_b: int, theta: float, seed: int) -> ZeroSumMarkovGame:
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_a, n_b))
    cost = rng.uniform(size=(n_states, n_a, n_b))
    return ZeroSumMarkovGame(P, cost, theta, rng.dirichlet(np.ones(n_states)))


def _xy(game, x, y):
    nA, nB = game.n_actions
    return policy_matrix(x, game.n_states, nA), policy_matrix(y, game.n_states, nB)


@dataclass(frozen=True)
class JointEvaluation:
    V: np.ndarray
    Q: np.ndarray


def joint_evaluation(game: ZeroSumMarkovGame, x, y) -> JointEvaluation:
    X, Y = _xy(game, x, y)
    P_z = np.einsum("sa,sb,sabt->st", X, Y, game.P)
    c_z = np.einsum("sa,sb,sab->s", X, Y, game.cost)
    th = game.theta
    V = np.linalg.solve(np.eye(game.n_states) - th * P_z, (1 - th) * c_z)
    return JointEvaluation(V, (1 - th) * game.cost + th * (game.P @ V))


def joint_value(game: ZeroSumMarkovGame, x, y) -> float:
    return float(game.rho0 @ joint_evaluation(game, x, y).V)


def p_tensor(game: ZeroSumMarkovGame) -> PTensorMap:
    """[P_s(Q, z)]_{a,b} = (1-theta) sigma(s,a,b) + theta E_{s'}[x_{s'}^T Q_{s'} y_{s'}]."""
    sigma, P, th = game.cost, game.P, game.theta

    def evaluate(Q, x, y):
        X, Y = _xy(game, x, y)
        return kernels.game_p_map(sigma, P, Q, X, Y, th)

    return PTensorMap(evaluate, game.cost.shape, th, GAME_C)


def game_internal_operator(game: ZeroSumMarkovGame) -> InternalOperator:
    """Per-state (Q_s y_s, -Q_s^T x_s)."""
    nA, nB = game.n_actions

    def evaluate(Q, x, y):
        X, Y = _xy(game, x, y)
        return kernels.game_operator(np.asarray(Q, dtype=np.float64), X, Y)

    return InternalOperator(np.full(game.n_states, nA), np.full(game.n_states, nB), evaluate)


def game_schedule(game: ZeroSumMarkovGame, T: int, eta=None):
    """Schedule with the game constants L1 = 2, L2 = 1, gamma = 2 theta."""
    return minimax_schedule(T, game.theta, GAME_L1, GAME_L2, 2 * game.theta, eta)


def game_size(game: ZeroSumMarkovGame) -> int:
    """M = |A| + |B|, the size entering the log factor of the bound."""
    return sum(game.n_actions)


@dataclass(frozen=True)
class ShapleySolution:
    Q: np.ndarray
    x: ProductDistribution
    y: ProductDistribution
    V: np.ndarray
    sweeps: int
    deltas: list
    state_gaps: np.ndarray


def shapley_fixed_point(game: ZeroSumMarkovGame, tol: float = 1e-6, *,
                        max_sweeps: int = 100_000, solver_max_iters: int = 5_000_000) -> ShapleySolution:
    """Shapley iteration with per-state matrix games solved to tol*(1-theta)/4.

    Stops when the sup-norm change of V is at most tol*(1-theta)/4. ``Q`` is
    the stage-game tensor built from the last input V, and ``x``, ``y`` are
    its per-state equilibria. Matrix-game solves are warm-started from the
    previous sweep.

    The result is then polished by evaluating (x, y) exactly: the polished Q
    is kept when (x, y) are still equilibria of its stage games within the
    per-state budget. It is then an exact fixed point of P(., x, y), and in
    single-player games it equals the optimum exactly.
    """
    th = game.theta
    budget = tol * (1 - th) / 4
    S = game.n_states
    V = np.zeros(S)
    warm = [None] * S
    deltas = []
    for sweep in range(1, max_sweeps + 1):
        G = (1 - th) * game.cost + th * (game.P @ V)
        sols = [solve_matrix_game(G[s], tol=budget, warm_start=warm[s], max_iters=solver_max_iters)
                for s in range(S)]
        warm = [s.warm_start for s in sols]
        V_new = np.array([s.value for s in sols])
        delta = float(np.max(np.abs(V_new - V)))
        deltas.append(delta)
        V = V_new
        if delta <= budget:
            break
    x = ProductDistribution.from_blocks([s.x for s in sols])
    y = ProductDistribution.from_blocks([s.y for s in sols])
    gaps = np.array([s.gap for s in sols])
    ev = joint_evaluation(game, x, y)
    polished_gaps = block_gaps(ev.Q, x, y)
    if np.all(polished_gaps <= budget):
        G, V, gaps = ev.Q, ev.V, polished_gaps
    return ShapleySolution(G, x, y, V, sweep, deltas, gaps)


def induced_mdp_for_min(game: ZeroSumMarkovGame, y) -> TabularMDP:
    """The MDP player x faces when y is fixed."""
    _, Y = _xy(game, np.full((game.n_states, game.n_actions[0]), 1.0 / game.n_actions[0]), y)
    P = np.einsum("sb,sabt->sat", Y, game.P)
    cost = np.einsum("sb,sab->sa", Y, game.cost)
    return TabularMDP(P, cost, game.theta, game.rho0)


def induced_mdp_for_max(game: ZeroSumMarkovGame, x) -> TabularMDP:
    """The MDP player y faces when x is fixed, with cost 1 - sigma so that costs stay in [0, 1]."""
    X, _ = _xy(game, x, np.full((game.n_states, game.n_actions[1]), 1.0 / game.n_actions[1]))
    P = np.einsum("sa,sabt->sbt", X, game.P)
    cost = 1.0 - np.einsum("sa,sab->sb", X, game.cost)
    return TabularMDP(P, cost, game.theta, game.rho0)


@dataclass(frozen=True)
class NashGapDetails:
    gap: float
    max_value: float
    min_value: float
    best_response_y: ProductDistribution
    best_response_x: ProductDistribution
    psi: np.ndarray


def nash_gap_details(game: ZeroSumMarkovGame, x, y) -> NashGapDetails:
    """Exact best responses on both sides.

    ``psi`` is the per-state max of the visitation distributions under
    (x, y*(x)) and (x*(y), y).
    """
    X, Y = _xy(game, x, y)
    # Normalized values of the constant cost 1 are 1, so max J = 1 - min J(1 - sigma).
    br_y = solve_mdp_exact(induced_mdp_for_max(game, X))
    br_x = solve_mdp_exact(induced_mdp_for_min(game, Y))
    hi = 1.0 - br_y.f_star
    lo = br_x.f_star
    d_y = visitation_distribution(induced_mdp_for_max(game, X), br_y.pi)
    d_x = visitation_distribution(induced_mdp_for_min(game, Y), br_x.pi)
    return NashGapDetails(hi - lo, hi, lo, br_y.pi, br_x.pi, np.maximum(d_x, d_y))


def nash_gap(game: ZeroSumMarkovGame, x, y) -> float:
    """max_{y'} J^{x,y'}(rho0) - min_{x'} J^{x',y}(rho0)."""
    return nash_gap_details(game, x, y).gap


def block_gaps(Q: np.ndarray, x, y) -> np.ndarray:
    """Per-state max_b (x_s^T Q_s)_b - min_a (Q_s y_s)_a."""
    S = Q.shape[0]
    X = policy_matrix(x, S, Q.shape[1])
    Y = policy_matrix(y, S, Q.shape[2])
    return np.einsum("sa,sab->sb", X, Q).max(axis=1) - np.einsum("sab,sb->sa", Q, Y).min(axis=1)


def gqcc_sampler(game: ZeroSumMarkovGame, q_star: np.ndarray, *, psi_scale: float = 1.0,
                 concentrations=(1.0, 0.2)):
    """Sampler for ``oracles.check_gqcc``: random joint policy -> (gap, block gaps, psi).

    ``psi_scale`` multiplies the visitation-based psi. Under normalized
    values the relation needs ``psi_scale = 1/(1-theta)``, mirroring
    ``mdp.PerformanceDifference``.
    """
    nA, nB = game.n_actions
    sizes_x = np.full(game.n_states, nA)
    sizes_y = np.full(game.n_states, nB)
    counter = [0]

    def sample(rng):
        k = concentrations[counter[0] % len(concentrations)]
        counter[0] += 1
        x = random_product_distribution(sizes_x, rng, k)
        y = random_product_distribution(sizes_y, rng, k)
        det = nash_gap_details(game, x, y)
        return det.gap, block_gaps(q_star, x, y), psi_scale * det.psi

    return sample
