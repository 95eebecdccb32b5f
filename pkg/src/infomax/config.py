"""Run configuration: JSON files checked against per-command schemas.

A config file is a JSON object whose keys are fields of the command's
schema below. Missing keys take the defaults; unknown keys are rejected.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional


class ConfigError(ValueError):
    pass


@dataclass
class ChaseRun:
    nx: int = 3
    ny: int = 3
    px: Optional[list] = None
    eta_p: float = 0.05
    eta_q: float = 0.5
    steps: int = 100_000
    log_every: int = 1000
    seed: int = 0

    def check(self):
        _positive(self, "eta_p", "eta_q")
        if self.eta_q <= self.eta_p:
            raise ConfigError(
                "eta_q must be greater than eta_p (two-timescale rule: the auxiliary "
                "marginal q descends faster than the code ascends)")
        _px(self)


@dataclass
class MeanFieldRun:
    nx: int = 4
    n: int = 2
    px: Optional[list] = None
    eta_code: float = 0.05
    eta_pred: float = 0.5
    steps: int = 200_000
    log_every: int = 1000
    seed: int = 0

    def check(self):
        _positive(self, "eta_code", "eta_pred")
        if self.eta_pred <= self.eta_code:
            raise ConfigError(
                "eta_pred must be greater than eta_code (two-timescale rule: the lateral "
                "predictor descends faster than the code ascends)")
        if not 0 <= self.n <= 12:
            raise ConfigError("n must be in 0..12")
        _px(self)


@dataclass
class FilterRun:
    env: Optional[str] = None
    n: int = 3
    T: int = 20
    events: int = 100
    seed: int = 0

    def check(self):
        if self.events < 0 or self.T < 1:
            raise ConfigError("events must be >= 0 and T >= 1")


@dataclass
class SpikingRun:
    env: Optional[str] = None
    n_stimuli: int = 4
    T: int = 30
    n: int = 2
    dt: float = 1e-3
    r_min: float = 0.5
    r_max: float = 100.0
    prior_rate: float = 5.0
    gamma: float = 0.99
    eta_alpha: float = 0.01
    eta_w: float = 1e4
    spike_gated: bool = True
    clamp_gate: bool = True
    init_noise: float = 0.05
    events: int = 50_000
    log_every: int = 1000
    eval_events: int = 20_000
    seed: int = 0

    def check(self):
        _positive(self, "dt", "r_min", "r_max", "eta_alpha", "eta_w")
        if self.events < 0 or self.log_every < 1:
            raise ConfigError("events must be >= 0 and log_every >= 1")


@dataclass
class CapacityRun:
    env: Optional[str] = None
    px: Optional[list] = None
    ny: Optional[int] = None
    seed: int = 0

    def check(self):
        if self.env is None and self.px is None:
            raise ConfigError("capacity needs either env or px")


SCHEMAS = {
    "run-chase": ChaseRun,
    "run-meanfield": MeanFieldRun,
    "run-filter": FilterRun,
    "run-spiking": SpikingRun,
    "capacity": CapacityRun,
    "validate": None,
}


def _positive(cfg, *names):
    for name in names:
        if not getattr(cfg, name) > 0:
            raise ConfigError(f"{name} must be > 0 (got {getattr(cfg, name)!r})")


def _px(cfg):
    if cfg.px is not None:
        if len(cfg.px) != cfg.nx:
            raise ConfigError(f"px has {len(cfg.px)} entries but nx = {cfg.nx}")
        if any(p < 0 for p in cfg.px) or abs(sum(cfg.px) - 1.0) > 1e-9:
            raise ConfigError("px must be a probability vector")


def _coerce(name, ftype, value):
    base = ftype.replace("Optional[", "").rstrip("]")
    if value is None and ftype.startswith("Optional"):
        return None
    try:
        if base == "bool":
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.lower() in ("true", "false", "1", "0"):
                return value.lower() in ("true", "1")
            raise TypeError
        if base == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if base == "float":
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if base == "list":
            if isinstance(value, str):
                value = json.loads(value)
            if not isinstance(value, list):
                raise TypeError
            return [float(v) for v in value]
        if base == "str":
            return str(value)
    except (TypeError, ValueError):
        pass
    raise ConfigError(f"key {name!r}: expected {base}, got {value!r}")


def build(command: str, values: dict):
    """Instantiate and check the schema for ``command`` from a dict."""
    schema = SCHEMAS.get(command)
    if schema is None:
        if values:
            raise ConfigError(f"{command} takes no configuration keys")
        return None
    fields = {f.name: f for f in dataclasses.fields(schema)}
    unknown = sorted(set(values) - set(fields))
    if unknown:
        raise ConfigError(f"unknown key(s) for {command}: {', '.join(unknown)}")
    kwargs = {k: _coerce(k, str(fields[k].type), v) for k, v in values.items()}
    cfg = schema(**kwargs)
    cfg.check()
    return cfg


def load_config(path, command: str):
    """Parse a JSON config file for ``command``; errors name the line or key."""
    with open(path) as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return build(command, raw)


def to_dict(cfg) -> dict:
    return {} if cfg is None else dataclasses.asdict(cfg)


def canonical(cfg) -> str:
    """Canonical JSON text: every key present, sorted, two-space indent."""
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True) + "\n"


def save_config(cfg, path):
    with open(path, "w") as fh:
        fh.write(canonical(cfg))
