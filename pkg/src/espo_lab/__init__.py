"""Tabular laboratory for three-mode safe policy optimisation with adaptive sample sizes."""

from .cmdp import TabularCmdp, ValueBundle, exact_policy_values, make_gridworld, make_random_cmdp, validate
from .espo import EspoConfig, IterationRecord, RunResult, espo_run, weighted_output_distribution
from .baselines import BaselineConfig, crpo_run, pcrpo_run
from .oracle import ConstrainedOptimum, solve_constrained_optimum, value_iteration
from .policy import Mode, SoftmaxPolicy, policy_from_logits

__all__ = [
    "BaselineConfig", "ConstrainedOptimum", "EspoConfig", "IterationRecord", "Mode", "RunResult",
    "SoftmaxPolicy", "TabularCmdp", "ValueBundle", "crpo_run", "espo_run", "exact_policy_values",
    "make_gridworld", "make_random_cmdp", "pcrpo_run", "policy_from_logits",
    "solve_constrained_optimum", "validate", "value_iteration", "weighted_output_distribution",
]
