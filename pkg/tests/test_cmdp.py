import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from espo_lab.cmdp import (
    TabularCmdp, evaluate_probs, make_gridworld, make_random_cmdp, validate,
)
from espo_lab.oracle import value_iteration
from espo_lab.policy import uniform_policy


def two_state(gamma=0.5, budget=1.0):
    P = np.zeros((2, 2, 2))
    P[0, 0, 0] = 1.0  # stay
    P[0, 1, 1] = 1.0  # move
    P[1, :, 1] = 1.0
    r = np.array([[1.0, 0.0], [0.0, 0.0]])
    c = np.array([[0.0, 0.5], [1.0, 1.0]])
    return TabularCmdp(P, r, c, budget, gamma, np.array([1.0, 0.0]))


def test_two_state_closed_form():
    cmdp = two_state(gamma=0.5)
    stay = evaluate_probs(cmdp, np.array([[1.0, 0.0], [1.0, 0.0]]))
    assert stay.v_reward_rho == pytest.approx(1.0 / (1 - 0.5))
    assert stay.v_cost_rho == pytest.approx(0.0)
    move = evaluate_probs(cmdp, np.array([[0.0, 1.0], [1.0, 0.0]]))
    # cost 0.5 now, then 1 forever from state 1
    assert move.v_cost_rho == pytest.approx(0.5 + 0.5 * 1.0 / (1 - 0.5))
    assert move.v_reward_rho == pytest.approx(0.0)


def test_visitation_is_distribution(small_cmdp):
    b = evaluate_probs(small_cmdp, uniform_policy(4, 3).probs)
    assert b.visitation.sum() == pytest.approx(1.0)
    assert np.all(b.visitation >= 0)


def test_bellman_consistency(small_cmdp, rng):
    probs = rng.dirichlet(np.ones(3), size=4)
    b = evaluate_probs(small_cmdp, probs)
    np.testing.assert_allclose((probs * b.q_reward).sum(1), b.v_reward, atol=1e-12)
    np.testing.assert_allclose((probs * b.adv_cost).sum(1), 0.0, atol=1e-12)


def test_gridworld_matches_enumeration():
    # Hand-enumerated transitions for the bottom-left cell of a 3x3 grid.
    g = make_gridworld(3, 3, hazards=[(1, 1)], goal=(2, 2), budget=1.0, slip=0.1)
    up, down, left, right = range(4)
    row = g.transitions[0]
    neighbours = [3, 1]  # (0,1) and (1,0)
    assert row[up, 3] == pytest.approx(0.9 + 0.05)
    assert row[up, 1] == pytest.approx(0.05)
    assert row[down, 0] == pytest.approx(0.9)  # wall
    assert row[left, 0] == pytest.approx(0.9)
    assert row[right, 1] == pytest.approx(0.95)
    for a in range(4):
        assert row[a].sum() == pytest.approx(1.0)
        assert sum(row[a, n] for n in neighbours) >= 0.1 - 1e-12
    assert np.all(g.cost[4] == 1.0) and g.cost.sum() == 4.0
    assert np.all(g.transitions[8, :, 8] == 1.0)
    assert g.reward[5, up] == pytest.approx(0.9 + 0.1 / 3)
    assert validate(g) == []


@pytest.mark.parametrize("seed", range(5))
def test_random_instance_valid_and_calibrated(seed):
    cmdp = make_random_cmdp(seed, 6, 3, 3, 0.3)
    assert validate(cmdp) == []
    lo, _ = value_iteration(cmdp, "cost", "min")
    hi, _ = value_iteration(cmdp, "cost", "max")
    assert cmdp.budget == pytest.approx(lo + 0.3 * (hi - lo))


def test_generator_deterministic():
    assert make_random_cmdp(3, 5, 2, 2, 0.5).same_as(make_random_cmdp(3, 5, 2, 2, 0.5))
    assert not make_random_cmdp(3, 5, 2, 2, 0.5).same_as(make_random_cmdp(4, 5, 2, 2, 0.5))


def test_validate_names_each_problem():
    cmdp = two_state()
    P = np.array(cmdp.transitions)
    P[0, 0, 0] = 0.7
    r = np.array(cmdp.reward)
    r[1, 1] = 2.0
    bad = TabularCmdp(P, r, cmdp.cost, -1.0, 1.0, np.array([0.5, 0.4]))
    kinds = {v.kind for v in validate(bad)}
    assert {"transition row does not sum to 1", "reward out of range", "negative budget",
            "discount outside (0,1)", "initial_dist does not sum to 1"} <= kinds
    row = next(v for v in validate(bad) if v.kind == "transition row does not sum to 1")
    assert row.index == (0, 0) and row.magnitude == pytest.approx(0.3)


def test_shape_errors():
    with pytest.raises(ValueError, match="reward shape"):
        TabularCmdp(np.ones((2, 2, 2)) / 2, np.zeros((2, 3)), np.zeros((2, 2)), 0.0, 0.5, [1, 0])


def test_arrays_are_read_only(small_cmdp):
    with pytest.raises(ValueError):
        small_cmdp.reward[0, 0] = 1.0


@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(1, 4), st.floats(0.1, 0.98))
def test_values_bounded(seed, S, A, gamma):
    cmdp = make_random_cmdp(seed, S, A, min(2, S), 0.5, discount=gamma)
    probs = np.random.default_rng(seed).dirichlet(np.ones(A), size=S)
    b = evaluate_probs(cmdp, probs)
    bound = cmdp.value_bound + 1e-9
    assert np.all((-1e-12 <= b.v_reward) & (b.v_reward <= bound))
    assert np.all((-1e-12 <= b.q_cost) & (b.q_cost <= bound))


def test_deterministic_policy_values_match_vi():
    cmdp = make_random_cmdp(11, 3, 2, 2, 0.5)
    best = max(
        evaluate_probs(cmdp, np.eye(2)[list(choice)]).v_reward_rho
        for choice in itertools.product(range(2), repeat=3)
    )
    assert value_iteration(cmdp, "reward", "max")[0] == pytest.approx(best, abs=1e-8)
