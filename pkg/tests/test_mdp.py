import numpy as np
import pytest

from gqcopt.errors import InstanceError
from gqcopt.mdp import (FiniteHorizonMDP, TabularMDP, finite_horizon_gqc_weights, finite_horizon_internal_function,
                        finite_horizon_occupancy, finite_horizon_optimal, finite_horizon_q, finite_horizon_value,
                        gqc_weights, npg_internal_function, performance_difference, policy_evaluation, policy_value,
                        random_finite_horizon_mdp, random_mdp, solve_mdp_exact, value_iteration,
                        visitation_distribution)
from gqcopt.oracles import check_gqc, random_product_distribution
from gqcopt.simplex_core import ProductDistribution


def random_policy(mdp, rng, conc=1.0):
    return random_product_distribution([mdp.n_actions] * mdp.n_states, rng, conc)


def test_single_state_value_is_the_cost():
    for theta in (0.0, 0.5, 0.99):
        m = TabularMDP(np.ones((1, 1, 1)), [[0.37]], theta, [1.0])
        assert policy_evaluation(m, [[1.0]]).V[0] == pytest.approx(0.37, abs=1e-15)


def test_two_state_cycle():
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = P[1, 0, 0] = 1.0
    m = TabularMDP(P, [[0.0], [1.0]], 0.5, [1.0, 0.0])
    # V1 = 0.5*0 + 0.5*V2, V2 = 0.5*1 + 0.5*V1
    np.testing.assert_allclose(policy_evaluation(m, [[1.0], [1.0]]).V, [1 / 3, 2 / 3], atol=1e-15)


def test_evaluation_matches_bellman_iteration():
    m = random_mdp(6, 3, 0.9, 1)
    rng = np.random.default_rng(0)
    pi = random_policy(m, rng).as_matrix()
    P_pi = np.einsum("sa,sat->st", pi, m.P)
    c_pi = np.einsum("sa,sa->s", pi, m.cost)
    V = np.zeros(6)
    for _ in range(10_000):
        V = (1 - m.theta) * c_pi + m.theta * P_pi @ V
    ev = policy_evaluation(m, pi)
    assert np.max(np.abs(ev.V - V)) <= 1e-8
    np.testing.assert_allclose(ev.V, np.einsum("sa,sa->s", pi, ev.Q), atol=1e-14)
    np.testing.assert_allclose(np.einsum("sa,sa->s", pi, ev.A), 0.0, atol=1e-14)


def test_visitation_special_cases():
    m = random_mdp(4, 2, 0.0, 3)
    pi = ProductDistribution.uniform([2] * 4)
    np.testing.assert_allclose(visitation_distribution(m, pi), m.rho0, atol=1e-15)
    single = TabularMDP(np.ones((1, 2, 1)), [[0.1, 0.2]], 0.9, [1.0])
    np.testing.assert_allclose(visitation_distribution(single, [[0.5, 0.5]]), [1.0], atol=1e-15)


def test_visitation_matches_truncated_series():
    m = random_mdp(8, 4, 0.9, 2)
    pi = random_policy(m, np.random.default_rng(1)).as_matrix()
    P_pi = np.einsum("sa,sat->st", pi, m.P)
    d, row = np.zeros(8), m.rho0.copy()
    for t in range(1000):
        d += (1 - m.theta) * m.theta ** t * row
        row = row @ P_pi
    assert np.max(np.abs(visitation_distribution(m, pi) - d)) <= 1e-8
    # the series truncated at 200 terms falls short by exactly theta^201 mass
    head = sum((1 - m.theta) * m.theta ** t for t in range(201))
    assert head == pytest.approx(1 - m.theta ** 201, rel=1e-12)


def test_value_iteration_zero_cost():
    m = random_mdp(5, 3, 0.8, 0)
    z = TabularMDP(m.P, np.zeros_like(m.cost), m.theta, m.rho0)
    np.testing.assert_array_equal(value_iteration(z).V, 0.0)


def test_value_iteration_single_action():
    m = random_mdp(5, 1, 0.8, 0)
    np.testing.assert_allclose(value_iteration(m).V, policy_evaluation(m, np.ones((5, 1))).V, atol=1e-12)


def test_value_iteration_is_optimal():
    m = random_mdp(8, 4, 0.9, 5)
    opt = value_iteration(m)
    exact = solve_mdp_exact(m)
    assert opt.f_star == pytest.approx(exact.f_star, abs=1e-12)
    rng = np.random.default_rng(0)
    for k in range(100):
        pi = random_policy(m, rng, 1.0 if k % 2 else 0.1)
        assert opt.f_star <= policy_value(m, pi) + 1e-12
        assert np.all(opt.V <= policy_evaluation(m, pi).V + 1e-12)


def test_symmetric_mdp_has_identical_q():
    n, k = 5, 3
    rng = np.random.default_rng(4)
    base = rng.dirichlet(np.ones(n), size=k)
    P = np.stack([np.stack([np.roll(base[a], s) for a in range(k)]) for s in range(n)])
    cost = np.tile(rng.uniform(size=k), (n, 1))
    m = TabularMDP(P, cost, 0.7, np.full(n, 1 / n))
    F = npg_internal_function(m)
    Q = F(ProductDistribution.uniform([k] * n)).reshape(n, k)
    np.testing.assert_allclose(Q, np.tile(Q[0], (n, 1)), atol=1e-14)


def test_npg_internal_function():
    m = random_mdp(4, 3, 0.9, 1)
    F = npg_internal_function(m)
    x = random_policy(m, np.random.default_rng(2))
    np.testing.assert_allclose(F(x, check=True), policy_evaluation(m, x).Q.ravel(), atol=1e-15)
    assert F.objective(x) == pytest.approx(policy_value(m, x), abs=1e-15)
    assert F.theta_bound == 1.0
    k = F.constants
    assert (k.Theta1, k.Theta2, k.K0, k.theta) == (0.9, 1.0, 1.0, 0.9)


@pytest.mark.parametrize("theta", [0.5, 0.9])
def test_performance_difference(theta):
    m = random_mdp(8, 4, theta, 7)
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = random_policy(m, rng), random_policy(m, rng)
        pd = performance_difference(m, a, b)
        assert pd.residual <= 1e-10
        assert pd.factor == pytest.approx(1 / (1 - theta))
    same = performance_difference(m, a, a)
    assert abs(same.lhs) <= 1e-15 and abs(same.rhs) <= 1e-15


def test_gqc_is_an_equality_for_mdps():
    m = random_mdp(6, 3, 0.8, 3)
    opt = value_iteration(m)
    F = npg_internal_function(m)
    w = gqc_weights(m, opt.pi)
    assert w.sum() == pytest.approx(1 / (1 - m.theta), rel=1e-12)
    rep = check_gqc(F.objective, F, opt.pi, w, 100, seed=1)
    assert rep.max_abs_slack <= 1e-9


def test_invalid_instances():
    P = np.full((2, 1, 2), 0.5)
    with pytest.raises(InstanceError, match=r"\(s,a\)"):
        TabularMDP(P * 1.1, [[0.0], [1.0]], 0.5, [0.5, 0.5])
    with pytest.raises(InstanceError):
        TabularMDP(P, [[0.0], [1.5]], 0.5, [0.5, 0.5])
    with pytest.raises(InstanceError):
        TabularMDP(P, [[0.0], [1.0]], 1.0, [0.5, 0.5])


# finite horizon ----------------------------------------------------------------

def test_finite_horizon_single_layer():
    fh = FiniteHorizonMDP(([[0.2, 0.9], [0.5, 0.4]],), (), [0.3, 0.7])
    F = finite_horizon_internal_function(fh)
    x = ProductDistribution.uniform([2, 2])
    np.testing.assert_allclose(F(x), [0.2, 0.9, 0.5, 0.4], atol=0)
    J, pi = finite_horizon_optimal(fh)
    assert J == pytest.approx(0.3 * 0.2 + 0.7 * 0.4, abs=1e-15)


def test_finite_horizon_q_matches_rollouts():
    fh = random_finite_horizon_mdp([3, 2, 3], [2, 3, 2], 5)
    rng = np.random.default_rng(0)
    pi = random_product_distribution(fh.block_sizes, rng)
    layers = fh.split_policy(pi)
    Q0 = finite_horizon_q(fh, pi)[0]
    n = 100_000

    def draw(probs):
        u = rng.uniform(size=(probs.shape[0], 1))
        return np.minimum((np.cumsum(probs, axis=1) < u).sum(axis=1), probs.shape[1] - 1)

    for s in range(3):
        for a in range(2):
            total = np.full(n, fh.costs[0][s, a])
            state = draw(np.tile(fh.transitions[0][s, a], (n, 1)))
            for h in range(1, fh.horizon):
                act = draw(layers[h][state])
                total += fh.costs[h][state, act]
                if h < fh.horizon - 1:
                    state = draw(fh.transitions[h][state, act])
            se = total.std(ddof=1) / np.sqrt(n)
            assert abs(total.mean() - Q0[s, a]) <= 3 * se + 1e-12


def test_finite_horizon_optimum_and_gqc_equality():
    fh = random_finite_horizon_mdp([3, 3, 3, 3], [2, 2, 2, 2], 1)
    J, pi_star = finite_horizon_optimal(fh)
    assert finite_horizon_value(fh, pi_star) == pytest.approx(J, abs=1e-14)
    rng = np.random.default_rng(3)
    for _ in range(50):
        assert J <= finite_horizon_value(fh, random_product_distribution(fh.block_sizes, rng)) + 1e-14
    F = finite_horizon_internal_function(fh)
    w = finite_horizon_gqc_weights(fh, pi_star)
    assert w.sum() == pytest.approx(fh.horizon, abs=1e-12)
    rep = check_gqc(F.objective, F, pi_star, w, 100, seed=2)
    assert rep.max_abs_slack <= 1e-9
    for d in finite_horizon_occupancy(fh, pi_star):
        assert d.sum() == pytest.approx(1.0, abs=1e-14)


def test_finite_horizon_validation():
    with pytest.raises(InstanceError):
        FiniteHorizonMDP(([[0.1]], [[0.2]]), (), [1.0])
    with pytest.raises(InstanceError, match="layer 2"):
        FiniteHorizonMDP(([[0.1]], [[0.2], [0.3]]), (np.array([[[0.5, 0.6]]]),), [1.0])
