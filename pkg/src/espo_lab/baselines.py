"""CRPO and fixed-sample PCRPO on the same policy and estimation substrate."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from .cmdp import TabularCmdp
from .espo import (
    EspoConfig,
    EspoState,
    IterationRecord,
    RunResult,
    _collect,
    adjust_sample_size,
    espo_run,
    evaluate_policy,
)
from .estimation import TRUNC_EPS, rollout_cost
from .policy import Mode, npg_update

ALGORITHMS = ("CRPO", "PCRPO")


@dataclass
class BaselineConfig:
    """``tolerance=None`` pairs CRPO's tolerance with ``h_plus``."""

    algorithm: str = "CRPO"
    iterations: int = 100
    learning_rate: float = 0.05
    sample_size: int = 16000
    tolerance: float | None = None
    h_plus: float = 0.5
    h_minus: float = -0.5
    decay_h_plus: bool = False
    decay_h_minus: bool = False
    x_r: float = 0.5
    budget: float | None = None
    seed: int = 0
    eval_mode: str = "sampled"
    trunc_eps: float = TRUNC_EPS
    snapshot_every: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.tolerance is not None and self.tolerance < 0:
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance}")
        self.as_espo()  # shared-field validation

    @property
    def crpo_tolerance(self) -> float:
        return self.h_plus if self.tolerance is None else self.tolerance

    def as_espo(self) -> EspoConfig:
        return EspoConfig(
            iterations=self.iterations,
            learning_rate=self.learning_rate,
            base_sample_size=self.sample_size,
            zeta_plus=0.0,
            zeta_minus=0.0,
            h_plus=self.h_plus,
            h_minus=self.h_minus,
            decay_h_plus=self.decay_h_plus,
            decay_h_minus=self.decay_h_minus,
            x_r=self.x_r,
            budget=self.budget,
            seed=self.seed,
            eval_mode=self.eval_mode,
            adaptive_samples=False,
            trunc_eps=self.trunc_eps,
            snapshot_every=self.snapshot_every,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "BaselineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        return cls(**data)


def _crpo_step(tolerance):
    def step(state: EspoState, cmdp: TabularCmdp, config: EspoConfig):
        b = cmdp.budget if config.budget is None else config.budget
        mode = Mode.COST if state.v_bar_c > b + tolerance else Mode.REWARD
        size, clamped = adjust_sample_size(config.base_sample_size, 0.0, rollout_cost(cmdp, config.trunc_eps))
        policy = npg_update(state.policy, state.estimate.q_bar_r, state.estimate.q_bar_c, mode, None,
                            config.learning_rate, cmdp.discount)
        bundle, est, v_r, v_c = evaluate_policy(cmdp, policy, size, config.eval_mode, config.seed,
                                                state.t + 1, config.trunc_eps)
        cumulative = state.cumulative_transitions + est.transitions_consumed
        record = IterationRecord(
            t=state.t, mode=mode, sample_size_used=size, v_bar_r=state.v_bar_r, v_bar_c=state.v_bar_c,
            h_plus=tolerance, h_minus=tolerance, zeta_plus=0.0, zeta_minus=0.0,
            cumulative_transitions=cumulative, x_clamped=clamped,
        )
        new_state = EspoState(state.t + 1, policy, bundle, est, v_r, v_c, size, state.h_plus,
                              state.h_minus, 0.0, 0.0, cumulative)
        return new_state, record

    return step


def crpo_run(cmdp: TabularCmdp, config: BaselineConfig, initial_logits=None) -> RunResult:
    """Cost step when ``V_c > b + tolerance``, reward step otherwise; fixed budget."""
    return _collect("CRPO", cmdp, config.as_espo(), _crpo_step(config.crpo_tolerance), initial_logits)


def pcrpo_run(cmdp: TabularCmdp, config: BaselineConfig | EspoConfig, initial_logits=None) -> RunResult:
    """ESPO's three-mode loop with every evaluation at the fixed base size."""
    espo_cfg = config.as_espo() if isinstance(config, BaselineConfig) else config
    if espo_cfg.adaptive_samples:
        espo_cfg = replace(espo_cfg, adaptive_samples=False)
    return espo_run(cmdp, espo_cfg, initial_logits)


def run_algorithm(name: str, cmdp: TabularCmdp, config, initial_logits=None) -> RunResult:
    name = name.upper()
    if name == "ESPO":
        return espo_run(cmdp, config, initial_logits)
    if name == "PCRPO":
        return pcrpo_run(cmdp, config, initial_logits)
    if name == "CRPO":
        if isinstance(config, EspoConfig):
            config = crpo_config_from(config)
        return crpo_run(cmdp, config, initial_logits)
    raise ValueError(f"unknown algorithm {name!r}")


def crpo_config_from(config: EspoConfig, tolerance: float | None = None) -> BaselineConfig:
    """CRPO settings matched to an ESPO config (tolerance defaults to h_plus)."""
    return BaselineConfig(
        algorithm="CRPO",
        iterations=config.iterations,
        learning_rate=config.learning_rate,
        sample_size=config.base_sample_size,
        tolerance=tolerance,
        h_plus=config.h_plus,
        h_minus=config.h_minus,
        x_r=config.x_r,
        budget=config.budget,
        seed=config.seed,
        eval_mode=config.eval_mode,
        trunc_eps=config.trunc_eps,
        snapshot_every=config.snapshot_every,
    )
