"""Run configuration: ``key = value`` files, overrides and validation."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

ALGOS = ("bc", "sqil", "dsac")


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists one message per offending field."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class RunConfig:
    env: str = ""
    algo: str = "dsac"
    seed: int = 1
    total_steps: int = 50_000
    # expert training budget; 0 picks the environment's default
    expert_steps: int = 0
    warm_up: int = 10_000
    gamma: float = 0.99
    buffer_capacity: int = 500_000
    batch_size: int = 100
    tau: float = 5e-3
    init_alpha: float = 1.0
    eval_interval: int = 5_000
    eval_episodes: int = 10
    network_profile: str = "full"
    absorbing_wrapper: bool = True
    disc_sees_indicator: bool = True
    demo_bonus: float = 0.01
    lambda_demo: float = 1.0
    lambda_samp: float = 1.0
    gp_coeff: float = 10.0
    disc_lr: float = 1e-3
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    alpha_lr: float = 1e-3
    lr_decay: float = 0.5
    lr_decay_interval: int = 100_000
    decay_all_networks: bool = False
    actor_clip: float = 40.0
    critic_clip: float = 0.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    wall_time_in_metrics: bool = False
    # end a run at the first evaluation whose mean return reaches this value
    stop_at_return: float | None = None

    def validate(self) -> "RunConfig":
        from .envs import ENVIRONMENTS
        from .nets import PROFILES

        problems = []
        if not self.env:
            problems.append("env: missing (required key)")
        elif self.env not in ENVIRONMENTS:
            problems.append(f"env: unknown environment {self.env!r}")
        if self.algo not in ALGOS:
            problems.append(f"algo: must be one of {', '.join(ALGOS)}")
        if self.network_profile not in PROFILES:
            problems.append(f"network_profile: must be one of {', '.join(sorted(PROFILES))}")
        for name in ("total_steps", "batch_size", "eval_interval", "eval_episodes", "buffer_capacity", "lr_decay_interval"):
            if getattr(self, name) < 1:
                problems.append(f"{name}: must be >= 1")
        if self.batch_size < 2:
            problems.append("batch_size: must be >= 2 (split between demos and samples)")
        if self.warm_up < 0:
            problems.append("warm_up: must be >= 0")
        if self.expert_steps < 0:
            problems.append("expert_steps: must be >= 0 (0 selects the environment default)")
        if self.stop_at_return is not None and math.isnan(self.stop_at_return):
            problems.append("stop_at_return: must be a number or none")
        if not 0.0 <= self.gamma < 1.0:
            problems.append("gamma: must lie in [0, 1)")
        if not 0.0 <= self.tau <= 1.0:
            problems.append("tau: must lie in [0, 1]")
        if not 0.0 < self.lr_decay <= 1.0:
            problems.append("lr_decay: must lie in (0, 1]")
        for name in ("actor_lr", "critic_lr", "alpha_lr", "disc_lr", "init_alpha", "lambda_demo", "lambda_samp", "adam_eps"):
            if not getattr(self, name) > 0:
                problems.append(f"{name}: must be > 0")
        for name in ("demo_bonus", "gp_coeff", "actor_clip", "critic_clip"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                problems.append(f"{name}: must be finite and >= 0")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                problems.append(f"{name}: must lie in [0, 1)")
        if problems:
            raise ConfigError(problems)
        return self

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = ["# resolved run configuration"]
        for f in fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if kind == "float | None":
        if raw.lower() == "none":
            return None
        kind = "float"
    if kind in ("bool", bool):
        low = raw.lower()
        if low in ("true", "on", "yes", "1"):
            return True
        if low in ("false", "off", "no", "0"):
            return False
        raise ValueError(f"expected a boolean (true/false/on/off), got {raw!r}")
    if kind in ("int", int):
        value = float(raw)
        if not value.is_integer():
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(value)
    if kind in ("float", float):
        return float(raw)
    return raw


def parse_assignments(lines, source: str = "<config>") -> dict:
    values, problems = {}, []
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            problems.append(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
            continue
        key, raw = (part.strip() for part in text.split("=", 1))
        if key not in _FIELD_TYPES:
            problems.append(f"{key}: unknown key ({source}:{lineno})")
            continue
        try:
            values[key] = _coerce(key, raw)
        except ValueError as e:
            problems.append(f"{key}: {e}")
    if problems:
        raise ConfigError(problems)
    return values


def load_config(path=None, overrides=(), **explicit) -> RunConfig:
    """Build a validated config from a file, ``key=value`` overrides and keyword values (in that order)."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError([f"config: cannot read {path}: {e}"]) from e
        values.update(parse_assignments(text.splitlines(), str(path)))
    values.update(parse_assignments(overrides, "--set"))
    values.update({k: v for k, v in explicit.items() if v is not None})
    return RunConfig(**values).validate()
