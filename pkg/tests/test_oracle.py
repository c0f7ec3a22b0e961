import numpy as np
import pytest

from espo_lab.cmdp import TabularCmdp, evaluate_probs, make_random_cmdp
from espo_lab.oracle import occupancy_to_policy, solve_constrained_optimum, value_iteration
from espo_lab.verify import oracle_dominance


def one_state(gamma=0.5, budget=0.4):
    # two self-loop actions: (r, c) = (1, 1) and (0, 0)
    P = np.ones((1, 2, 1))
    return TabularCmdp(P, np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]]), budget / (1 - gamma),
                       gamma, np.array([1.0]))


def test_one_state_mixture_matches_grid_search():
    gamma = 0.5
    cmdp = one_state(gamma)
    opt = solve_constrained_optimum(cmdp)
    grid = np.round(np.arange(0, 1 + 1e-12, 1e-4), 4)
    best = max(p for p in grid if p / (1 - gamma) <= cmdp.budget + 1e-12)
    assert opt.policy[0, 0] == pytest.approx(best, abs=1e-6)
    assert opt.optimal_reward_value * (1 - gamma) == pytest.approx(0.4, abs=1e-6)
    assert opt.feasible


def test_lp_values_match_policy_evaluation():
    cmdp = make_random_cmdp(2, 5, 3, 3, 0.4)
    opt = solve_constrained_optimum(cmdp)
    b = evaluate_probs(cmdp, opt.policy)
    assert b.v_reward_rho == pytest.approx(opt.optimal_reward_value, abs=1e-7)
    assert b.v_cost_rho == pytest.approx(opt.optimal_cost_value, abs=1e-7)
    assert opt.optimal_cost_value <= cmdp.budget + 1e-7


def test_loose_budget_recovers_unconstrained_optimum():
    cmdp = make_random_cmdp(5, 5, 3, 2, 1.0)
    assert solve_constrained_optimum(cmdp).optimal_reward_value == pytest.approx(
        value_iteration(cmdp)[0], abs=1e-7)


def test_infeasible_budget_falls_back_to_cost_minimiser():
    cmdp = make_random_cmdp(5, 5, 3, 2, 0.5).with_budget(-1.0)
    opt = solve_constrained_optimum(cmdp)
    assert not opt.feasible
    assert opt.optimal_cost_value == pytest.approx(value_iteration(cmdp, "cost", "min")[0], abs=1e-7)


@pytest.mark.parametrize("seed", range(3))
def test_dominates_random_feasible_policies(seed):
    margin, feasible = oracle_dominance(make_random_cmdp(seed, 4, 3, 2, 0.6), 200,
                                        np.random.default_rng(seed))
    assert feasible > 0 and margin >= -1e-6


def test_occupancy_to_policy_uniform_on_unvisited():
    occ = np.array([[0.2, 0.6], [0.0, 0.0]])
    np.testing.assert_allclose(occupancy_to_policy(occ), [[0.25, 0.75], [0.5, 0.5]])


def test_roundtrip_dict():
    opt = solve_constrained_optimum(make_random_cmdp(1, 3, 2, 2, 0.5))
    back = type(opt).from_dict(opt.to_dict())
    assert back.optimal_reward_value == opt.optimal_reward_value
    np.testing.assert_array_equal(back.policy, opt.policy)
