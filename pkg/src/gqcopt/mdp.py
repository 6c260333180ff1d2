"""Tabular MDPs with (1-theta)-normalized values, and their policy-optimization oracles.

Values follow the normalized convention
``V(s) = (1-theta) E[sum_t theta^t sigma(s_t, a_t) | s_0 = s]`` so that costs in
[0, 1] give values in [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .errors import InstanceError
from .oracles import GqcConstants, InternalFunction
from .simplex_core import ProductDistribution

STOCH_TOL = 1e-9


def _check_distribution(v, what, tol=STOCH_TOL):
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0) or abs(v.sum() - 1.0) > tol:
        raise InstanceError(f"{what} is not a probability vector (sum {v.sum()!r})")


def check_stochastic(P, label):
    """Raise InstanceError naming the first row of ``P`` that is not a distribution."""
    P = np.asarray(P, dtype=np.float64)
    sums = P.sum(axis=-1)
    bad = (np.abs(sums - 1.0) > STOCH_TOL) | np.any(P < 0, axis=-1)
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise InstanceError(f"transition row {label}={idx} is not a distribution (sum {sums[idx]!r})")


@dataclass(frozen=True)
class TabularMDP:
    """Discounted MDP. ``P`` has shape (S, A, S), ``cost`` (S, A) with entries in [0, 1]."""

    P: np.ndarray
    cost: np.ndarray
    theta: float
    rho0: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64)
        cost = np.asarray(self.cost, dtype=np.float64)
        rho0 = np.asarray(self.rho0, dtype=np.float64)
        if P.ndim != 3 or P.shape[0] != P.shape[2] or cost.shape != P.shape[:2]:
            raise InstanceError(f"inconsistent shapes P{P.shape}, cost{cost.shape}")
        if rho0.shape != (P.shape[0],):
            raise InstanceError("rho0 must have one entry per state")
        if not 0.0 <= self.theta < 1.0:
            raise InstanceError(f"theta must lie in [0, 1), got {self.theta}")
        if np.any(cost < 0) or np.any(cost > 1):
            raise InstanceError("costs must lie in [0, 1]")
        check_stochastic(P, "(s,a)")
        _check_distribution(rho0, "rho0")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "rho0", rho0)
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def n_actions(self) -> int:
        return self.P.shape[1]


def random_mdp(n_states: int, n_actions: int, theta: float, seed: int) -> TabularMDP:
    """Dirichlet(1) transition rows and initial distribution, uniform [0, 1] costs."""
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    cost = rng.uniform(size=(n_states, n_actions))
    rho0 = rng.dirichlet(np.ones(n_states))
    return TabularMDP(P, cost, theta, rho0)


def policy_matrix(pi, n_states: int, n_actions: int) -> np.ndarray:
    """(S, A) matrix view of a policy given as ProductDistribution or array."""
    if isinstance(pi, ProductDistribution):
        M = pi.as_matrix()
    else:
        M = np.asarray(pi, dtype=np.float64)
    if M.shape != (n_states, n_actions):
        raise InstanceError(f"policy has shape {M.shape}, expected {(n_states, n_actions)}")
    return M


@dataclass(frozen=True)
class PolicyEvaluation:
    V: np.ndarray
    Q: np.ndarray
    A: np.ndarray


def _induced(mdp: TabularMDP, pi: np.ndarray):
    P_pi = np.einsum("sa,sat->st", pi, mdp.P)
    c_pi = np.einsum("sa,sa->s", pi, mdp.cost)
    return P_pi, c_pi


def policy_evaluation(mdp: TabularMDP, pi) -> PolicyEvaluation:
    """Exact V, Q and advantage of ``pi`` by a dense linear solve."""
    pi = policy_matrix(pi, mdp.n_states, mdp.n_actions)
    P_pi, c_pi = _induced(mdp, pi)
    th = mdp.theta
    V = np.linalg.solve(np.eye(mdp.n_states) - th * P_pi, (1.0 - th) * c_pi)
    Q = (1.0 - th) * mdp.cost + th * (mdp.P @ V)
    return PolicyEvaluation(V, Q, Q - V[:, None])


def policy_value(mdp: TabularMDP, pi) -> float:
    """J^pi(rho0) = <rho0, V^pi>."""
    return float(mdp.rho0 @ policy_evaluation(mdp, pi).V)


def visitation_distribution(mdp: TabularMDP, pi, s0_dist=None) -> np.ndarray:
    """d = (1-theta) sum_t theta^t Pr_t, i.e. the solution of d = (1-theta) rho + theta (P^pi)^T d."""
    pi = policy_matrix(pi, mdp.n_states, mdp.n_actions)
    rho = mdp.rho0 if s0_dist is None else np.asarray(s0_dist, dtype=np.float64)
    P_pi, _ = _induced(mdp, pi)
    th = mdp.theta
    return np.linalg.solve(np.eye(mdp.n_states) - th * P_pi.T, (1.0 - th) * rho)


@dataclass(frozen=True)
class OptimalSolution:
    V: np.ndarray
    pi: ProductDistribution
    f_star: float
    iterations: int


def _greedy(Q: np.ndarray) -> np.ndarray:
    pi = np.zeros_like(Q)
    pi[np.arange(Q.shape[0]), np.argmin(Q, axis=1)] = 1.0
    return pi


def value_iteration(mdp: TabularMDP, tol: float = 1e-10, *, polish: bool = True,
                    max_iters: int = 1_000_000) -> OptimalSolution:
    """Bellman-optimality iteration to sup-norm change <= tol*(1-theta)/theta.

    With ``polish`` the greedy policy is refined by exact policy iteration,
    so the returned policy is exactly optimal and ``V`` is its exact value.
    """
    th = mdp.theta
    V = np.zeros(mdp.n_states)
    stop = tol * (1.0 - th) / th if th > 0 else np.inf
    it = 0
    while True:
        it += 1
        V_new = np.min((1.0 - th) * mdp.cost + th * (mdp.P @ V), axis=1)
        done = np.max(np.abs(V_new - V)) <= stop or it >= max_iters
        V = V_new
        if done:
            break
    pi = _greedy((1.0 - th) * mdp.cost + th * (mdp.P @ V))
    if polish:
        pi, V = _policy_iteration(mdp, pi)
    return OptimalSolution(V, ProductDistribution.from_matrix(pi), float(mdp.rho0 @ V), it)


def _policy_iteration(mdp: TabularMDP, pi: np.ndarray, max_rounds: int = 10_000):
    """Exact policy iteration; switches action only on strict improvement."""
    idx = np.arange(mdp.n_states)
    for _ in range(max_rounds):
        ev = policy_evaluation(mdp, pi)
        cur = np.argmax(pi, axis=1)
        best = np.argmin(ev.Q, axis=1)
        improve = ev.Q[idx, best] < ev.Q[idx, cur] - 1e-13
        if not np.any(improve):
            return pi, ev.V
        new = np.where(improve, best, cur)
        pi = np.zeros_like(pi)
        pi[idx, new] = 1.0
    return pi, policy_evaluation(mdp, pi).V


def solve_mdp_exact(mdp: TabularMDP) -> OptimalSolution:
    """Exactly optimal deterministic policy via policy iteration."""
    pi0 = _greedy(mdp.cost)
    pi, V = _policy_iteration(mdp, pi0)
    return OptimalSolution(V, ProductDistribution.from_matrix(pi), float(mdp.rho0 @ V), 0)


class _EvaluationCache:
    """Remembers the last policy evaluation so F and f share one solve."""

    def __init__(self, compute):
        self._compute = compute
        self._key = None
        self._value = None

    def __call__(self, x: ProductDistribution):
        key = x.flat.tobytes()
        if key != self._key:
            self._value = self._compute(x)
            self._key = key
        return self._value


def npg_internal_function(mdp: TabularMDP) -> InternalFunction:
    """F_i(pi) = Q^pi(s_i, .), with objective J^pi(rho0).

    Declared sup-norm bound 1 and schedule constants
    (Theta1=theta, Theta2=1, K0=1).
    """
    nS, nA = mdp.n_states, mdp.n_actions
    cache = _EvaluationCache(lambda x: policy_evaluation(mdp, x.flat.reshape(nS, nA)))
    return InternalFunction(
        sizes=np.full(nS, nA),
        evaluate=lambda x: cache(x).Q.ravel(),
        theta_bound=1.0,
        constants=GqcConstants(Theta1=mdp.theta, Theta2=1.0, K0=1.0, theta=mdp.theta),
        objective=lambda x: float(mdp.rho0 @ cache(x).V),
    )


@dataclass(frozen=True)
class PerformanceDifference:
    """``lhs = V^{pi*}(rho0) - V^pi(rho0)`` and ``rhs = E_{s~d^{pi*}} <A^pi(s,.), pi*(.|s) - pi(.|s)>``.

    Under the normalized value convention the two are related by
    ``lhs = factor * rhs`` with ``factor = 1/(1-theta)``.
    """

    lhs: float
    rhs: float
    factor: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.factor * self.rhs)


def performance_difference(mdp: TabularMDP, pi_star, pi) -> PerformanceDifference:
    nS, nA = mdp.n_states, mdp.n_actions
    ps = policy_matrix(pi_star, nS, nA)
    p = policy_matrix(pi, nS, nA)
    lhs = float(mdp.rho0 @ policy_evaluation(mdp, ps).V - mdp.rho0 @ policy_evaluation(mdp, p).V)
    adv = policy_evaluation(mdp, p).A
    d = visitation_distribution(mdp, ps)
    rhs = float(d @ np.einsum("sa,sa->s", adv, ps - p))
    return PerformanceDifference(lhs, rhs, 1.0 / (1.0 - mdp.theta))


def gqc_weights(mdp: TabularMDP, pi_star) -> np.ndarray:
    """Per-state weights 1/gamma_i making the quasar-convexity relation an equality for F = Q.

    Equal to d^{pi*}(s_i) / (1-theta); see ``PerformanceDifference``.
    """
    return visitation_distribution(mdp, pi_star) / (1.0 - mdp.theta)


# Finite horizon -------------------------------------------------------------

@dataclass(frozen=True)
class FiniteHorizonMDP:
    """Layered MDP with unnormalized cumulative cost.

    ``costs[h]`` has shape (S_h, A_h). ``transitions[h]`` for h = 0..H-2 has
    shape (S_h, A_h, S_{h+1}). ``rho1`` is the distribution over layer-0 states.
    """

    costs: tuple
    transitions: tuple
    rho1: np.ndarray

    def __post_init__(self):
        costs = tuple(np.asarray(c, dtype=np.float64) for c in self.costs)
        trans = tuple(np.asarray(p, dtype=np.float64) for p in self.transitions)
        if len(costs) == 0 or len(trans) != len(costs) - 1:
            raise InstanceError("need H cost layers and H-1 transition layers")
        for h, c in enumerate(costs):
            if c.ndim != 2:
                raise InstanceError(f"cost layer {h + 1} must be 2-d")
            if np.any(c < 0) or np.any(c > 1):
                raise InstanceError(f"cost layer {h + 1} has entries outside [0, 1]")
        for h, p in enumerate(trans):
            if p.shape != costs[h].shape + (costs[h + 1].shape[0],):
                raise InstanceError(f"transition layer {h + 2} has shape {p.shape}")
            check_stochastic(p, f"layer {h + 2} (s,a)")
        rho1 = np.asarray(self.rho1, dtype=np.float64)
        if rho1.shape != (costs[0].shape[0],):
            raise InstanceError("rho1 must have one entry per first-layer state")
        _check_distribution(rho1, "rho1")
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "transitions", trans)
        object.__setattr__(self, "rho1", rho1)

    @property
    def horizon(self) -> int:
        return len(self.costs)

    @property
    def block_sizes(self) -> np.ndarray:
        return np.concatenate([np.full(c.shape[0], c.shape[1]) for c in self.costs])

    def split_policy(self, pi) -> list:
        """Per-layer (S_h, A_h) matrices from a flat ProductDistribution in (h, s) order."""
        flat = pi.flat if isinstance(pi, ProductDistribution) else np.asarray(pi, dtype=np.float64)
        out, pos = [], 0
        for c in self.costs:
            n = c.size
            out.append(flat[pos:pos + n].reshape(c.shape))
            pos += n
        if pos != flat.size:
            raise InstanceError("policy size does not match the layer shapes")
        return out


def random_finite_horizon_mdp(states, actions, seed: int) -> FiniteHorizonMDP:
    rng = np.random.default_rng(seed)
    H = len(states)
    costs = [rng.uniform(size=(states[h], actions[h])) for h in range(H)]
    trans = [rng.dirichlet(np.ones(states[h + 1]), size=(states[h], actions[h])) for h in range(H - 1)]
    return FiniteHorizonMDP(tuple(costs), tuple(trans), rng.dirichlet(np.ones(states[0])))


def finite_horizon_q(fh: FiniteHorizonMDP, pi) -> list:
    """Backward induction: Q_h = sigma_h + P_h V_{h+1}, V_h = <pi_h, Q_h>."""
    layers = fh.split_policy(pi)
    Qs = [None] * fh.horizon
    V_next = None
    for h in range(fh.horizon - 1, -1, -1):
        Q = fh.costs[h].copy()
        if V_next is not None:
            Q += fh.transitions[h] @ V_next
        Qs[h] = Q
        V_next = np.einsum("sa,sa->s", layers[h], Q)
    return Qs


def finite_horizon_value(fh: FiniteHorizonMDP, pi) -> float:
    Qs = finite_horizon_q(fh, pi)
    V1 = np.einsum("sa,sa->s", fh.split_policy(pi)[0], Qs[0])
    return float(fh.rho1 @ V1)


def finite_horizon_occupancy(fh: FiniteHorizonMDP, pi) -> list:
    """Layer state distributions d_h under ``pi`` starting from rho1."""
    layers = fh.split_policy(pi)
    d = [fh.rho1]
    for h in range(fh.horizon - 1):
        d.append(np.einsum("s,sa,sat->t", d[-1], layers[h], fh.transitions[h]))
    return d


def finite_horizon_optimal(fh: FiniteHorizonMDP):
    """Exact optimum by backward induction. Returns ``(J*, pi*)``."""
    blocks = [None] * fh.horizon
    V_next = None
    for h in range(fh.horizon - 1, -1, -1):
        Q = fh.costs[h].copy()
        if V_next is not None:
            Q += fh.transitions[h] @ V_next
        blocks[h] = _greedy(Q)
        V_next = Q.min(axis=1)
    pi = ProductDistribution.from_blocks([row for b in blocks for row in b])
    return float(fh.rho1 @ V_next), pi


def finite_horizon_internal_function(fh: FiniteHorizonMDP) -> InternalFunction:
    """Blocks indexed by (h, s_h); F_{h,s} = Q_h(s, .). Constants (0, H, H, 0)."""
    cache = _EvaluationCache(lambda x: finite_horizon_q(fh, x))

    def objective(x):
        Qs = cache(x)
        return float(fh.rho1 @ np.einsum("sa,sa->s", fh.split_policy(x)[0], Qs[0]))

    H = fh.horizon
    return InternalFunction(
        sizes=fh.block_sizes,
        evaluate=lambda x: np.concatenate([Q.ravel() for Q in cache(x)]),
        theta_bound=float(H),
        constants=GqcConstants(Theta1=0.0, Theta2=float(H), K0=float(H), theta=0.0),
        objective=objective,
    )


def finite_horizon_gqc_weights(fh: FiniteHorizonMDP, pi_star) -> np.ndarray:
    """Weights d_h^{pi*}(s) making the relation an equality in the finite-horizon case."""
    return np.concatenate(finite_horizon_occupancy(fh, pi_star))

