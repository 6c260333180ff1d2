import numpy as np
import pytest

from gqcopt.errors import InstanceError
from gqcopt.markov_game import (ZeroSumMarkovGame, block_gaps, game_internal_operator, induced_mdp_for_min,
                                joint_evaluation, joint_value, nash_gap, nash_gap_details, p_tensor, random_game,
                                shapley_fixed_point)
from gqcopt.mdp import policy_evaluation, value_iteration
from gqcopt.oracles import random_product_distribution


def random_joint(game, rng, conc=1.0):
    nA, nB = game.n_actions
    S = game.n_states
    return (random_product_distribution([nA] * S, rng, conc).as_matrix(),
            random_product_distribution([nB] * S, rng, conc).as_matrix())


def joint_visitation(game, x, y):
    P_z = np.einsum("sa,sb,sabt->st", x, y, game.P)
    th = game.theta
    return np.linalg.solve(np.eye(game.n_states) - th * P_z.T, (1 - th) * game.rho0)


def test_constant_cost():
    g = random_game(3, 2, 2, 0.8, 0)
    c = ZeroSumMarkovGame(g.P, np.full_like(g.cost, 0.4), g.theta, g.rho0)
    ev = joint_evaluation(c, *random_joint(c, np.random.default_rng(0)))
    np.testing.assert_allclose(ev.V, 0.4, atol=1e-14)
    np.testing.assert_allclose(ev.Q, 0.4, atol=1e-14)


def test_single_column_reduces_to_mdp():
    g = random_game(4, 3, 1, 0.9, 2)
    y = np.ones((4, 1))
    mdp = induced_mdp_for_min(g, y)
    x = random_joint(g, np.random.default_rng(1))[0]
    np.testing.assert_allclose(joint_evaluation(g, x, y).V, policy_evaluation(mdp, x).V, atol=1e-14)
    sol = shapley_fixed_point(g)
    assert np.max(np.abs(sol.V - value_iteration(mdp).V)) <= 1e-8


def test_theta_zero_p_map_is_the_cost():
    g = random_game(3, 2, 3, 0.0, 1)
    rng = np.random.default_rng(0)
    Q = rng.uniform(size=g.cost.shape)
    np.testing.assert_array_equal(p_tensor(g)(Q, *random_joint(g, rng)), g.cost)


def test_p_map_fixed_point_and_contraction():
    g = random_game(5, 3, 2, 0.8, 3)
    p = p_tensor(g)
    rng = np.random.default_rng(1)
    for _ in range(20):
        x, y = random_joint(g, rng)
        Qz = joint_evaluation(g, x, y).Q
        assert np.max(np.abs(p(Qz, x, y) - Qz)) <= 1e-9
        Q1, Q2 = rng.uniform(size=(2,) + g.cost.shape)
        assert np.max(np.abs(p(Q1, x, y) - p(Q2, x, y))) <= g.theta * np.max(np.abs(Q1 - Q2)) + 1e-15
        assert 0.0 <= p(Q1, x, y).min() and p(Q1, x, y).max() <= 1.0


def test_joint_performance_difference():
    g = random_game(5, 3, 3, 0.8, 6)
    rng = np.random.default_rng(2)
    for _ in range(20):
        x, y = random_joint(g, rng)
        y2 = random_joint(g, rng)[1]
        Q = joint_evaluation(g, x, y).Q
        d = joint_visitation(g, x, y2)
        inner = np.einsum("s,sa,sab,sb->", d, x, Q, y2 - y)
        lhs = joint_value(g, x, y2) - joint_value(g, x, y)
        assert abs(lhs - inner / (1 - g.theta)) <= 1e-12


def test_trivial_game():
    g = random_game(3, 1, 1, 0.6, 0)
    sol = shapley_fixed_point(g)
    one = np.ones((3, 1))
    np.testing.assert_allclose(sol.Q, joint_evaluation(g, one, one).Q, atol=1e-9)
    assert nash_gap(g, one, one) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("theta", [0.5, 0.8])
def test_shapley_saddle_inequalities(theta):
    tol = 1e-6
    g = random_game(5, 3, 3, theta, 11)
    sol = shapley_fixed_point(g, tol)
    assert nash_gap(g, sol.x, sol.y) <= 2 * tol
    p = p_tensor(g)
    rng = np.random.default_rng(0)
    assert np.max(np.abs(p(sol.Q, sol.x, sol.y) - sol.Q)) <= 4 * tol
    for _ in range(50):
        x, y = random_joint(g, rng)
        assert np.all(p(sol.Q, x, sol.y) >= sol.Q - 4 * tol)
        assert np.all(p(sol.Q, sol.x, y) <= sol.Q + 4 * tol)


def test_gap_nonnegative_and_details():
    g = random_game(4, 2, 3, 0.7, 5)
    rng = np.random.default_rng(3)
    for _ in range(20):
        x, y = random_joint(g, rng)
        det = nash_gap_details(g, x, y)
        v = joint_value(g, x, y)
        assert det.min_value - 1e-12 <= v <= det.max_value + 1e-12
        assert det.gap >= 0 and np.all(det.psi >= 0)
        assert det.psi.sum() <= 2 + 1e-9


def test_gap_permutation_invariance():
    g = random_game(4, 2, 3, 0.7, 8)
    x, y = random_joint(g, np.random.default_rng(4))
    perm = np.array([2, 0, 3, 1])
    P = g.P[perm][:, :, :, perm]
    h = ZeroSumMarkovGame(P, g.cost[perm], g.theta, g.rho0[perm])
    assert nash_gap(h, x[perm], y[perm]) == pytest.approx(nash_gap(g, x, y), abs=1e-13)


def test_operator_values_and_lipschitz():
    g = random_game(3, 2, 3, 0.5, 0)
    op = game_internal_operator(g)
    rng = np.random.default_rng(5)
    x, y = random_joint(g, rng)
    fx, fy = op(np.zeros(g.cost.shape), x, y)
    assert not fx.any() and not fy.any()
    worst = 0.0
    for _ in range(200):
        Q1, Q2 = rng.normal(size=(2,) + g.cost.shape)
        a, b = op(Q1, x, y), op(Q2, x, y)
        ratio = (np.max(np.abs(a[0] - b[0])) + np.max(np.abs(a[1] - b[1]))) / np.max(np.abs(Q1 - Q2))
        worst = max(worst, ratio)
    assert worst <= 2.0


def test_block_gaps_at_equilibrium():
    g = random_game(4, 3, 3, 0.5, 2)
    sol = shapley_fixed_point(g, 1e-7)
    assert np.all(block_gaps(sol.Q, sol.x, sol.y) <= 1e-7)
    np.testing.assert_allclose(block_gaps(sol.Q, sol.x, sol.y), sol.state_gaps, atol=1e-12)


def test_invalid_game():
    g = random_game(2, 2, 2, 0.5, 0)
    bad = g.P.copy()
    bad[1, 0, 1] *= 2
    with pytest.raises(InstanceError, match=r"\(1, 0, 1\)|\(s,a,b\)"):
        ZeroSumMarkovGame(bad, g.cost, g.theta, g.rho0)
