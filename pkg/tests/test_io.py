import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from espo_lab import io
from espo_lab.baselines import BaselineConfig
from espo_lab.cmdp import make_gridworld, make_random_cmdp
from espo_lab.espo import EspoConfig, IterationRecord, espo_run
from espo_lab.oracle import solve_constrained_optimum
from espo_lab.policy import Mode
from espo_lab.verify import _same_record

opt_float = st.one_of(st.none(), st.floats(allow_nan=False, allow_infinity=True, width=64))
fin = st.floats(allow_nan=False, allow_infinity=False)

records = st.builds(
    IterationRecord,
    t=st.integers(0, 10**6), mode=st.sampled_from(list(Mode)), sample_size_used=st.integers(1, 10**9),
    v_bar_r=fin, v_bar_c=fin, h_plus=st.floats(allow_nan=False), h_minus=st.floats(allow_nan=False),
    zeta_plus=fin, zeta_minus=fin, grad_dot=opt_float, grad_norm_r=opt_float, grad_norm_c=opt_float,
    y_r=opt_float, y_c=opt_float, cumulative_transitions=st.integers(0, 10**15), x_clamped=st.booleans(),
)


@given(st.lists(records, max_size=8))
def test_trace_csv_roundtrip_exact(trace):
    assert io.trace_from_csv(io.trace_to_csv(trace)) == trace


def test_real_trace_roundtrip(tmp_path):
    cmdp = make_random_cmdp(0, 4, 3, 2, 0.4)
    run = espo_run(cmdp, EspoConfig(iterations=25, base_sample_size=2000))
    io.write_trace(run.trace, tmp_path / "t.csv")
    back = io.read_trace(tmp_path / "t.csv")
    assert all(_same_record(a, b) for a, b in zip(run.trace, back)) and len(back) == 25
    header = (tmp_path / "t.csv").read_text().splitlines()[0].split(",")
    assert header[:15] == ["t", "mode", "X_t", "v_bar_r", "v_bar_c", "h_plus", "h_minus", "zeta_plus",
                           "zeta_minus", "grad_dot", "grad_norm_r", "grad_norm_c", "y_r", "y_c",
                           "cum_transitions"]


@pytest.mark.parametrize("cmdp", [make_random_cmdp(5, 6, 3, 3, 0.35, v_max=2.5),
                                  make_gridworld(3, 3, [(1, 1)], (2, 2), 0.5)])
def test_env_roundtrip_bit_exact(tmp_path, cmdp):
    io.save_cmdp(cmdp, tmp_path / "e.json")
    back = io.load_cmdp(tmp_path / "e.json")
    assert back.same_as(cmdp) and back.name == cmdp.name


def test_config_and_oracle_roundtrip(tmp_path):
    for cfg in (EspoConfig(x_r=0.25, decay_h_plus=True), BaselineConfig(tolerance=0.3)):
        io.save_config(cfg, tmp_path / "c.json")
        assert io.load_config(tmp_path / "c.json") == cfg
    opt = solve_constrained_optimum(make_random_cmdp(1, 3, 2, 2, 0.5))
    io.save_optimum(opt, tmp_path / "o.json")
    assert io.load_optimum(tmp_path / "o.json").optimal_reward_value == opt.optimal_reward_value


@pytest.mark.parametrize("data, field", [
    ({"iterations": "ten"}, "iterations"),
    ({"eval_mode": "psychic"}, "eval_mode"),
    ({"iterations": 5, "learnin_rate": 0.1}, "learnin_rate"),
    ({"algorithm": "CRPO", "tolerance": -2}, "tolerance"),
    ({"adaptive_samples": 1}, "adaptive_samples"),
])
def test_config_errors_name_field(data, field):
    with pytest.raises(io.FormatError, match=field):
        io.config_from_dict(data)


def test_env_errors_name_field():
    good = io.cmdp_to_dict(make_random_cmdp(0, 3, 2, 2, 0.5))
    for key in ("transitions", "discount", "budget"):
        broken = dict(good)
        del broken[key]
        with pytest.raises(io.FormatError, match=key):
            io.cmdp_from_dict(broken)
    with pytest.raises(io.FormatError, match="discount"):
        io.cmdp_from_dict({**good, "discount": "0.9"})
    with pytest.raises(io.FormatError, match="num_states"):
        io.cmdp_from_dict({**good, "num_states": 7})


def test_trace_errors_name_column():
    text = io.trace_to_csv([IterationRecord(0, Mode.COST, 10, 1.0, 2.0, 0.5, -0.5, 0.1, -0.4)])
    with pytest.raises(io.FormatError, match="mode"):
        io.trace_from_csv(text.replace("COST", "PANIC"))
    with pytest.raises(io.FormatError, match="v_bar_r"):
        io.trace_from_csv(text.replace(",1,2,", ",x,2,"))
    with pytest.raises(io.FormatError, match="header"):
        io.trace_from_csv("a,b\n1,2\n")


def test_number_format_is_17_digits():
    assert io._fmt(0.1) == "0.10000000000000001"
    assert io._fmt(math.inf) == "inf" and io._fmt(None) == "" and io._fmt(np.int64(3)) == "3"
