"""Monte-Carlo Q estimation from a generative model, with sample accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cmdp import TabularCmdp
from .policy import SoftmaxPolicy

TRUNC_EPS = 0.01


class BudgetTooSmall(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QEstimate:
    q_bar_r: np.ndarray
    q_bar_c: np.ndarray
    rollouts_per_pair: int
    horizon: int
    transitions_consumed: int
    rng_seed_used: int | None


def truncation_horizon(discount: float, v_max: float = 1.0, eps: float = TRUNC_EPS) -> int:
    """Smallest H whose discounted tail ``v_max gamma^H / (1-gamma)`` is at most ``eps``."""
    return max(1, math.ceil(math.log(eps * (1.0 - discount) / v_max) / math.log(discount)))


def rollout_cost(cmdp: TabularCmdp, eps: float = TRUNC_EPS) -> int:
    """Transitions needed for one rollout from every (s, a) pair."""
    return cmdp.num_states * cmdp.num_actions * truncation_horizon(cmdp.discount, cmdp.v_max, eps)


def rollouts_for_budget(cmdp: TabularCmdp, sample_budget: int, eps: float = TRUNC_EPS) -> int:
    return int(sample_budget) // rollout_cost(cmdp, eps)


def transitions_for_budget(cmdp: TabularCmdp, sample_budget: int, eps: float = TRUNC_EPS) -> int:
    """Transitions actually drawn for a budget; leftovers below one sweep are discarded."""
    return rollouts_for_budget(cmdp, sample_budget, eps) * rollout_cost(cmdp, eps)


def _sample_rows(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = (cdf_rows <= u[:, None]).sum(axis=1)
    return np.minimum(idx, cdf_rows.shape[1] - 1)


def estimate_q(cmdp: TabularCmdp, policy: SoftmaxPolicy, sample_budget: int, seed: int,
               eps: float = TRUNC_EPS) -> QEstimate:
    """Average ``m`` truncated discounted returns started at each (s, a).

    All rollouts run as one vectorised batch driven by a single generator
    seeded with ``seed``, so results do not depend on any external state.
    """
    S, A, gamma = cmdp.num_states, cmdp.num_actions, cmdp.discount
    H = truncation_horizon(gamma, cmdp.v_max, eps)
    m = rollouts_for_budget(cmdp, sample_budget, eps)
    if m < 1:
        raise BudgetTooSmall(f"sample budget {sample_budget} below one rollout per pair ({S * A * H})")
    rng = np.random.default_rng(seed)

    trans_cdf = np.cumsum(cmdp.transitions, axis=2)
    pol_cdf = np.cumsum(policy.probs, axis=1)
    trans_cdf[..., -1] = 1.0
    pol_cdf[:, -1] = 1.0
    s = np.repeat(np.arange(S), A * m)
    a = np.tile(np.repeat(np.arange(A), m), S)
    ret_r = np.zeros(s.size)
    ret_c = np.zeros(s.size)
    disc = 1.0
    for k in range(H):
        ret_r += disc * cmdp.reward[s, a]
        ret_c += disc * cmdp.cost[s, a]
        disc *= gamma
        if k == H - 1:
            break
        s = _sample_rows(trans_cdf[s, a], rng.random(s.size))
        a = _sample_rows(pol_cdf[s], rng.random(s.size))
    q_r = ret_r.reshape(S, A, m).mean(axis=2)
    q_c = ret_c.reshape(S, A, m).mean(axis=2)
    return QEstimate(q_r, q_c, m, H, S * A * m * H, seed)


def exact_estimate(cmdp: TabularCmdp, bundle, sample_budget: int, eps: float = TRUNC_EPS) -> QEstimate:
    """Wrap exact Q tables as an estimate, charging the nominal budget."""
    H = truncation_horizon(cmdp.discount, cmdp.v_max, eps)
    m = rollouts_for_budget(cmdp, sample_budget, eps)
    S, A = cmdp.num_states, cmdp.num_actions
    return QEstimate(bundle.q_reward, bundle.q_cost, m, H, S * A * m * H, None)


def v_from_estimate(est: QEstimate, policy: SoftmaxPolicy, rho) -> tuple[float, float]:
    """``V(rho) = sum_s rho(s) sum_a pi(a|s) Q(s, a)`` for both objectives."""
    pi = policy.probs
    rho = np.asarray(rho, dtype=float)
    return (float(rho @ (pi * est.q_bar_r).sum(axis=1)),
            float(rho @ (pi * est.q_bar_c).sum(axis=1)))
