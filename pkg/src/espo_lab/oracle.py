"""Exact constrained optimum by linear programming over occupancy measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .cmdp import TabularCmdp

VI_TOL = 1e-10


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ConstrainedOptimum:
    optimal_reward_value: float
    optimal_cost_value: float
    occupancy: np.ndarray
    policy: np.ndarray
    feasible: bool
    budget: float

    def to_dict(self) -> dict:
        return {
            "optimal_reward_value": self.optimal_reward_value,
            "optimal_cost_value": self.optimal_cost_value,
            "feasible": self.feasible,
            "budget": self.budget,
            "occupancy": self.occupancy.tolist(),
            "policy": self.policy.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConstrainedOptimum":
        return cls(
            optimal_reward_value=float(data["optimal_reward_value"]),
            optimal_cost_value=float(data["optimal_cost_value"]),
            occupancy=np.array(data["occupancy"], dtype=float),
            policy=np.array(data["policy"], dtype=float),
            feasible=bool(data["feasible"]),
            budget=float(data["budget"]),
        )


def _flow_constraints(cmdp: TabularCmdp):
    S, A, gamma = cmdp.num_states, cmdp.num_actions, cmdp.discount
    # row s': sum_a d(s',a) - gamma sum_{s,a} d(s,a) P(s,a,s') = (1-gamma) rho(s')
    A_eq = np.kron(np.eye(S), np.ones((1, A))) - gamma * cmdp.transitions.reshape(S * A, S).T
    b_eq = (1.0 - gamma) * cmdp.initial_dist
    return A_eq, b_eq


def occupancy_to_policy(occupancy: np.ndarray) -> np.ndarray:
    marg = occupancy.sum(axis=1, keepdims=True)
    A = occupancy.shape[1]
    with np.errstate(invalid="ignore", divide="ignore"):
        pi = np.where(marg > 1e-12, occupancy / marg, 1.0 / A)
    return pi


def _solve(c_obj, cmdp, A_ub=None, b_ub=None):
    A_eq, b_eq = _flow_constraints(cmdp)
    return linprog(c_obj, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                   bounds=(0, None), method="highs")


def solve_constrained_optimum(cmdp: TabularCmdp) -> ConstrainedOptimum:
    """Maximise reward value subject to ``V_c(rho) <= b``.

    Infeasible budgets return the cost-minimising occupancy with
    ``feasible=False``.  Solver failures other than infeasibility raise.
    """
    S, A, gamma = cmdp.num_states, cmdp.num_actions, cmdp.discount
    scale = 1.0 / (1.0 - gamma)
    r = cmdp.reward.ravel() * scale
    c = cmdp.cost.ravel() * scale
    res = _solve(-r, cmdp, A_ub=c[None, :], b_ub=np.array([cmdp.budget]))
    feasible = True
    if res.status == 2:
        feasible = False
        res = _solve(c, cmdp)
    if res.status != 0:
        raise OracleError(f"LP failed on {cmdp.name}: status {res.status} ({res.message})")
    d = np.clip(res.x, 0.0, None).reshape(S, A)
    return ConstrainedOptimum(
        optimal_reward_value=float(d.ravel() @ r),
        optimal_cost_value=float(d.ravel() @ c),
        occupancy=d,
        policy=occupancy_to_policy(d),
        feasible=feasible,
        budget=float(cmdp.budget),
    )


def value_iteration(cmdp: TabularCmdp, objective: str = "reward", sense: str = "max", tol: float = VI_TOL):
    """Bellman optimality iteration; returns ``(V(rho), greedy policy)``.

    The greedy policy is a deterministic ``(S, A)`` one-hot table.
    """
    table = {"reward": cmdp.reward, "cost": cmdp.cost}[objective]
    pick = {"max": np.max, "min": np.min}[sense]
    arg = {"max": np.argmax, "min": np.argmin}[sense]
    gamma = cmdp.discount
    V = np.zeros(cmdp.num_states)
    while True:
        Q = table + gamma * cmdp.transitions @ V
        V_new = pick(Q, axis=1)
        done = np.max(np.abs(V_new - V)) < tol
        V = V_new
        if done:
            break
    Q = table + gamma * cmdp.transitions @ V
    greedy = np.zeros_like(table)
    greedy[np.arange(cmdp.num_states), arg(Q, axis=1)] = 1.0
    return float(cmdp.initial_dist @ V), greedy
