"""File formats: instance/config/oracle JSON documents and trace CSVs."""

from __future__ import annotations

import csv
import io as _io
import json
from dataclasses import fields
from pathlib import Path

import numpy as np

from .baselines import BaselineConfig
from .cmdp import TabularCmdp
from .espo import EspoConfig, IterationRecord
from .oracle import ConstrainedOptimum
from .policy import Mode

ENV_FORMAT = "espo-lab/cmdp"
TRACE_COLUMNS = (
    "t", "mode", "X_t", "v_bar_r", "v_bar_c", "h_plus", "h_minus", "zeta_plus", "zeta_minus",
    "grad_dot", "grad_norm_r", "grad_norm_c", "y_r", "y_c", "cum_transitions", "x_clamped",
)
_FIELD_OF = {"X_t": "sample_size_used", "cum_transitions": "cumulative_transitions"}
_INT_COLUMNS = {"t", "X_t", "cum_transitions"}


class FormatError(ValueError):
    """Malformed input file; the message names the offending field."""


def _require(data: dict, key: str, where: str):
    if key not in data:
        raise FormatError(f"{where}: missing field '{key}'")
    return data[key]


# ---------------------------------------------------------------- environments

def cmdp_to_dict(cmdp: TabularCmdp) -> dict:
    # json writes floats with repr, which round-trips exactly (17 significant digits at most)
    return {
        "format": ENV_FORMAT,
        "name": cmdp.name,
        "num_states": cmdp.num_states,
        "num_actions": cmdp.num_actions,
        "discount": cmdp.discount,
        "budget": cmdp.budget,
        "v_max": cmdp.v_max,
        "initial_dist": cmdp.initial_dist.tolist(),
        "reward": cmdp.reward.tolist(),
        "cost": cmdp.cost.tolist(),
        "transitions": cmdp.transitions.tolist(),
    }


def cmdp_from_dict(data: dict, where: str = "environment") -> TabularCmdp:
    fmt = data.get("format", ENV_FORMAT)
    if fmt != ENV_FORMAT:
        raise FormatError(f"{where}: field 'format' is {fmt!r}, expected {ENV_FORMAT!r}")
    arrays = {}
    for key in ("transitions", "reward", "cost", "initial_dist"):
        try:
            arrays[key] = np.array(_require(data, key, where), dtype=float)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{where}: field '{key}' is not a numeric array ({exc})") from None
    scalars = {}
    for key in ("discount", "budget"):
        value = _require(data, key, where)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise FormatError(f"{where}: field '{key}' must be a number, got {value!r}")
        scalars[key] = float(value)
    v_max = data.get("v_max", 1.0)
    try:
        cmdp = TabularCmdp(arrays["transitions"], arrays["reward"], arrays["cost"], scalars["budget"],
                           scalars["discount"], arrays["initial_dist"], float(v_max), str(data.get("name", "cmdp")))
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from None
    for key, n in (("num_states", cmdp.num_states), ("num_actions", cmdp.num_actions)):
        if key in data and data[key] != n:
            raise FormatError(f"{where}: field '{key}' is {data[key]} but arrays imply {n}")
    return cmdp


def _load_json(path, what: str) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise FormatError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{what} file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise FormatError(f"{what} file {path} must hold a JSON object")
    return data


def _dump_json(data: dict, path) -> None:
    Path(path).write_text(json.dumps(data, indent=1) + "\n")


def save_cmdp(cmdp: TabularCmdp, path) -> None:
    _dump_json(cmdp_to_dict(cmdp), path)


def load_cmdp(path) -> TabularCmdp:
    return cmdp_from_dict(_load_json(path, "environment"), str(path))


# ---------------------------------------------------------------- configs

def _type_ok(annotation: str, value) -> bool:
    if value is None:
        return "None" in annotation
    if isinstance(value, bool) or annotation.startswith("bool"):
        return isinstance(value, bool) and annotation.startswith("bool")
    if annotation.startswith("int"):
        return isinstance(value, int)
    if annotation.startswith("float"):
        return isinstance(value, (int, float))
    if annotation.startswith("str"):
        return isinstance(value, str)
    return True


def config_from_dict(data: dict, where: str = "config") -> EspoConfig | BaselineConfig:
    """``BaselineConfig`` when an ``algorithm`` key is present, else ``EspoConfig``."""
    cls = BaselineConfig if "algorithm" in data else EspoConfig
    for f in fields(cls):
        if f.name in data and not _type_ok(str(f.type), data[f.name]):
            raise FormatError(f"{where}: field '{f.name}' must be {f.type}, got {data[f.name]!r}")
    try:
        return cls.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from None


def load_config(path) -> EspoConfig | BaselineConfig:
    return config_from_dict(_load_json(path, "config"), str(path))


def save_config(config: EspoConfig | BaselineConfig, path) -> None:
    _dump_json(config.to_dict(), path)


# ---------------------------------------------------------------- oracle

def save_optimum(opt: ConstrainedOptimum, path) -> None:
    _dump_json(opt.to_dict(), path)


def load_optimum(path) -> ConstrainedOptimum:
    data = _load_json(path, "oracle")
    for key in ("optimal_reward_value", "optimal_cost_value", "feasible", "budget", "occupancy", "policy"):
        _require(data, key, str(path))
    return ConstrainedOptimum.from_dict(data)


# ---------------------------------------------------------------- traces

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Mode):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def trace_to_csv(trace: list[IterationRecord]) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for rec in trace:
        writer.writerow(_fmt(getattr(rec, _FIELD_OF.get(col, col))) for col in TRACE_COLUMNS)
    return buf.getvalue()


def write_trace(trace: list[IterationRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(trace_to_csv(trace))


def _parse(col: str, text: str, where: str):
    if col == "mode":
        try:
            return Mode(text)
        except ValueError:
            raise FormatError(f"{where}: column 'mode' has unknown value {text!r}") from None
    if col == "x_clamped":
        if text not in ("0", "1"):
            raise FormatError(f"{where}: column 'x_clamped' must be 0 or 1, got {text!r}")
        return text == "1"
    if text == "":
        return None
    try:
        return int(text) if col in _INT_COLUMNS else float(text)
    except ValueError:
        raise FormatError(f"{where}: column '{col}' has non-numeric value {text!r}") from None


def trace_from_csv(text: str, where: str = "trace") -> list[IterationRecord]:
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows:
        raise FormatError(f"{where}: empty file (header row is mandatory)")
    header = tuple(rows[0])
    required = TRACE_COLUMNS[:-1]  # x_clamped is optional on input
    if header[: len(required)] != required or len(header) > len(TRACE_COLUMNS):
        missing = [c for c in required if c not in header]
        raise FormatError(f"{where}: bad header; expected columns {','.join(TRACE_COLUMNS)}"
                          + (f" (missing '{missing[0]}')" if missing else ""))
    trace = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(f"{where}: line {lineno} has {len(row)} cells, expected {len(header)}")
        values = {col: _parse(col, cell, f"{where} line {lineno}") for col, cell in zip(header, row)}
        for col in ("t", "X_t", "v_bar_r", "v_bar_c", "h_plus", "h_minus", "zeta_plus", "zeta_minus",
                    "cum_transitions"):
            if values[col] is None:
                raise FormatError(f"{where} line {lineno}: column '{col}' is empty")
        values.setdefault("x_clamped", False)
        trace.append(IterationRecord(**{_FIELD_OF.get(c, c): v for c, v in values.items()}))
    return trace


def read_trace(path) -> list[IterationRecord]:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise FormatError(f"trace file not found: {path}") from None
    return trace_from_csv(text, str(path))


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(_fmt(v) if not isinstance(v, str) else v for v in row)
