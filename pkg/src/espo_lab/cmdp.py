"""Tabular constrained MDPs: instances, validation, exact evaluation, generators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable

import numpy as np

if TYPE_CHECKING:
    from .policy import SoftmaxPolicy

PROB_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class TabularCmdp:
    """Finite CMDP with a single cost signal.

    Arrays are indexed ``transitions[s, a, s']``, ``reward[s, a]`` and
    ``cost[s, a]``.  Feasible policies satisfy ``V_c(rho) <= budget``.
    """

    transitions: np.ndarray
    reward: np.ndarray
    cost: np.ndarray
    budget: float
    discount: float
    initial_dist: np.ndarray
    v_max: float = 1.0
    name: str = field(default="cmdp")

    def __post_init__(self):
        for attr in ("transitions", "reward", "cost", "initial_dist"):
            arr = np.array(getattr(self, attr), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        if self.transitions.ndim != 3:
            raise ValueError(f"transitions must be (S, A, S), got shape {self.transitions.shape}")
        S, A, S2 = self.transitions.shape
        if S2 != S:
            raise ValueError(f"transitions must be (S, A, S), got shape {self.transitions.shape}")
        for attr in ("reward", "cost"):
            if getattr(self, attr).shape != (S, A):
                raise ValueError(f"{attr} shape {getattr(self, attr).shape} != {(S, A)}")
        if self.initial_dist.shape != (S,):
            raise ValueError(f"initial_dist shape {self.initial_dist.shape} != {(S,)}")

    @property
    def num_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[1]

    @property
    def value_bound(self) -> float:
        return self.v_max / (1.0 - self.discount)

    def with_budget(self, budget: float) -> "TabularCmdp":
        return TabularCmdp(self.transitions, self.reward, self.cost, budget,
                           self.discount, self.initial_dist, self.v_max, self.name)

    def same_as(self, other: "TabularCmdp") -> bool:
        return (
            self.budget == other.budget
            and self.discount == other.discount
            and self.v_max == other.v_max
            and np.array_equal(self.transitions, other.transitions)
            and np.array_equal(self.reward, other.reward)
            and np.array_equal(self.cost, other.cost)
            and np.array_equal(self.initial_dist, other.initial_dist)
        )


@dataclass(frozen=True)
class Violation:
    kind: str
    index: tuple
    magnitude: float

    def __str__(self):
        return f"{self.kind} at {self.index}: magnitude {self.magnitude:.3g}"


@dataclass(frozen=True, eq=False)
class ValueBundle:
    """Exact value tables of one policy on one CMDP."""

    v_reward: np.ndarray
    v_cost: np.ndarray
    q_reward: np.ndarray
    q_cost: np.ndarray
    adv_reward: np.ndarray
    adv_cost: np.ndarray
    visitation: np.ndarray
    v_reward_rho: float
    v_cost_rho: float


def validate(cmdp: TabularCmdp) -> list[Violation]:
    """Return every violated instance invariant; an empty list means valid."""
    out: list[Violation] = []
    P = cmdp.transitions
    if not (0.0 < cmdp.discount < 1.0):
        out.append(Violation("discount outside (0,1)", (), float(cmdp.discount)))
    if not cmdp.v_max > 0:
        out.append(Violation("v_max not positive", (), float(cmdp.v_max)))
    if not cmdp.budget >= 0:
        out.append(Violation("negative budget", (), float(cmdp.budget)))

    for s, a, s2 in zip(*np.nonzero(~(P >= 0))):
        out.append(Violation("negative transition probability", (int(s), int(a), int(s2)), float(P[s, a, s2])))
    row_sums = P.sum(axis=2)
    for s, a in zip(*np.nonzero(np.abs(row_sums - 1.0) > PROB_TOL)):
        out.append(Violation("transition row does not sum to 1", (int(s), int(a)), float(1.0 - row_sums[s, a])))

    for label, table in (("reward", cmdp.reward), ("cost", cmdp.cost)):
        bad = ~((table >= 0.0) & (table <= cmdp.v_max))
        for s, a in zip(*np.nonzero(bad)):
            v = float(table[s, a])
            mag = -v if v < 0 else v - cmdp.v_max
            out.append(Violation(f"{label} out of range", (int(s), int(a)), mag))

    rho = cmdp.initial_dist
    for s in np.nonzero(~(rho >= 0))[0]:
        out.append(Violation("negative initial probability", (int(s),), float(rho[s])))
    if abs(rho.sum() - 1.0) > PROB_TOL:
        out.append(Violation("initial_dist does not sum to 1", (), float(1.0 - rho.sum())))
    return out


def policy_matrices(cmdp: TabularCmdp, probs: np.ndarray):
    """State-to-state kernel and per-state reward/cost under ``probs``."""
    P_pi = np.einsum("sa,sat->st", probs, cmdp.transitions)
    r_pi = np.einsum("sa,sa->s", probs, cmdp.reward)
    c_pi = np.einsum("sa,sa->s", probs, cmdp.cost)
    return P_pi, r_pi, c_pi


def evaluate_probs(cmdp: TabularCmdp, probs: np.ndarray) -> ValueBundle:
    """Exact evaluation of a stochastic policy table ``probs[s, a]``."""
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (cmdp.num_states, cmdp.num_actions):
        raise ValueError(f"policy shape {probs.shape} does not match cmdp {(cmdp.num_states, cmdp.num_actions)}")
    gamma = cmdp.discount
    P_pi, r_pi, c_pi = policy_matrices(cmdp, probs)
    M = np.eye(cmdp.num_states) - gamma * P_pi
    try:
        V = np.linalg.solve(M, np.stack([r_pi, c_pi], axis=1))
        d = (1.0 - gamma) * np.linalg.solve(M.T, cmdp.initial_dist)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"policy evaluation solve failed for {cmdp.name}: {exc}") from exc
    v_r, v_c = V[:, 0], V[:, 1]
    next_v = cmdp.transitions @ V  # (S, A, 2)
    q_r = cmdp.reward + gamma * next_v[..., 0]
    q_c = cmdp.cost + gamma * next_v[..., 1]
    return ValueBundle(
        v_reward=v_r,
        v_cost=v_c,
        q_reward=q_r,
        q_cost=q_c,
        adv_reward=q_r - v_r[:, None],
        adv_cost=q_c - v_c[:, None],
        visitation=d,
        v_reward_rho=float(cmdp.initial_dist @ v_r),
        v_cost_rho=float(cmdp.initial_dist @ v_c),
    )


def exact_policy_values(cmdp: TabularCmdp, policy: "SoftmaxPolicy") -> ValueBundle:
    return evaluate_probs(cmdp, policy.probs)


def make_random_cmdp(
    seed: int,
    num_states: int,
    num_actions: int,
    branching: int,
    budget_quantile: float,
    discount: float = 0.9,
    v_max: float = 1.0,
) -> TabularCmdp:
    """Garnet-style random instance with a calibrated, binding budget.

    Each (s, a) gets ``branching`` distinct successors with Dirichlet(1)
    weights; rewards and costs are uniform on [0, v_max].  The budget is placed
    at ``budget_quantile`` between the smallest and largest achievable cost
    values, ``b = Vc_min + q (Vc_max - Vc_min)``.
    """
    from .oracle import value_iteration

    if num_states < 1 or num_actions < 1:
        raise ValueError("num_states and num_actions must be positive")
    if not 1 <= branching <= num_states:
        raise ValueError(f"branching must lie in [1, num_states], got {branching}")
    if not 0.0 < budget_quantile <= 1.0:
        raise ValueError(f"budget_quantile must lie in (0, 1], got {budget_quantile}")
    if not 0.0 < discount < 1.0:
        raise ValueError(f"discount must lie in (0, 1), got {discount}")
    if not v_max > 0:
        raise ValueError(f"v_max must be positive, got {v_max}")

    rng = np.random.default_rng(seed)
    S, A = num_states, num_actions
    P = np.zeros((S, A, S))
    for s in range(S):
        for a in range(A):
            succ = rng.choice(S, size=branching, replace=False)
            P[s, a, succ] = rng.dirichlet(np.ones(branching))
    reward = rng.uniform(0.0, v_max, size=(S, A))
    cost = rng.uniform(0.0, v_max, size=(S, A))
    rho = np.full(S, 1.0 / S)

    draft = TabularCmdp(P, reward, cost, 0.0, discount, rho, v_max=v_max, name=f"garnet-{seed}")
    c_min, _ = value_iteration(draft, "cost", "min")
    c_max, _ = value_iteration(draft, "cost", "max")
    budget = c_min + budget_quantile * (c_max - c_min)
    return draft.with_budget(float(budget))


GRID_MOVES = ((0, 1), (0, -1), (-1, 0), (1, 0))  # up, down, left, right


def make_gridworld(
    width: int,
    height: int,
    hazards: Iterable[tuple[int, int]],
    goal: tuple[int, int],
    budget: float,
    discount: float = 0.9,
    slip: float = 0.1,
) -> TabularCmdp:
    """Slippery gridworld; cell ``(x, y)`` maps to state ``y * width + x``.

    With probability ``1 - slip`` the chosen move is applied, otherwise a
    uniformly random in-bounds neighbour is entered.  Moves into walls stay
    put.  Entering the absorbing goal pays reward 1; occupying a hazard cell
    costs 1 per step.  Episodes start at (0, 0).
    """
    if width < 2 or height < 2:
        raise ValueError("gridworld dimensions must be >= 2")
    hazards = {tuple(h) for h in hazards}
    goal = tuple(goal)

    def inside(cell):
        return 0 <= cell[0] < width and 0 <= cell[1] < height

    for cell in hazards | {goal}:
        if not inside(cell):
            raise ValueError(f"cell {cell} out of bounds for {width}x{height} grid")
    if goal in hazards:
        raise ValueError("goal cannot be a hazard")

    S, A = width * height, len(GRID_MOVES)
    idx = lambda cell: cell[1] * width + cell[0]  # noqa: E731
    g = idx(goal)
    P = np.zeros((S, A, S))
    reward = np.zeros((S, A))
    cost = np.zeros((S, A))
    for y in range(height):
        for x in range(width):
            s = idx((x, y))
            if (x, y) in hazards:
                cost[s, :] = 1.0
            if s == g:
                P[s, :, s] = 1.0
                continue
            neighbours = [(x + dx, y + dy) for dx, dy in GRID_MOVES if inside((x + dx, y + dy))]
            for a, (dx, dy) in enumerate(GRID_MOVES):
                target = (x + dx, y + dy)
                P[s, a, idx(target) if inside(target) else s] += 1.0 - slip
                for nb in neighbours:
                    P[s, a, idx(nb)] += slip / len(neighbours)
            reward[s, :] = P[s, :, g]
    rho = np.zeros(S)
    rho[0] = 1.0
    return TabularCmdp(P, reward, cost, float(budget), discount, rho, name=f"grid-{width}x{height}")
