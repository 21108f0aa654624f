"""Run configuration: ``key = value`` text with ``#`` comments."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields

from hershape.agent import HER_KINDS
from hershape.envs import ENV_NAMES
from hershape.geometry import CONVENTIONS


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    env: str = "reach2d"
    seed: int = 0
    total_steps: int = 50_000
    episodes_per_cycle: int = 2
    updates_per_cycle: int = 20
    batch_size: int = 128
    buffer_capacity: int = 250_000
    her_strategy: str = "future"
    her_k: int = 4
    partial_relabel: bool = False
    dense_weight: float = 1.0
    gamma: float = 0.98
    tau: float = 0.05
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    explore_noise: float = 0.1
    random_eps: float = 0.2
    clip_target: bool = True
    obs_noise_std: float = 0.0
    action_noise_std: float = 0.0
    hidden_sizes: tuple = (64, 64)
    max_episode_steps: int = 0
    convention: str = "zxz"
    eval_interval: int = 5_000
    eval_episodes: int = 50
    transfer_checkpoint: str = ""
    transfer_parts: tuple = ("actor", "critic")
    out_dir: str = "runs"

    def validate(self) -> RunConfig:
        def bad(key, why):
            raise ConfigError(f"{key}: {why}")

        if self.env not in ENV_NAMES:
            bad("env", f"must be one of {', '.join(ENV_NAMES)}")
        for key in ("total_steps", "episodes_per_cycle", "updates_per_cycle", "batch_size", "buffer_capacity", "eval_interval", "eval_episodes"):
            if getattr(self, key) < 1:
                bad(key, "must be a positive integer")
        if self.max_episode_steps < 0:
            bad("max_episode_steps", "must be >= 1, or 0 for the environment default")
        if self.seed < 0 or self.seed >= 2**64:
            bad("seed", "must be an unsigned 64-bit integer")
        if self.her_strategy not in HER_KINDS:
            bad("her_strategy", f"must be one of {', '.join(HER_KINDS)}")
        if self.her_k < 1:
            bad("her_k", "must be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            bad("gamma", "must lie in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            bad("tau", "must lie in (0, 1]")
        for key in ("actor_lr", "critic_lr"):
            if not getattr(self, key) > 0.0:
                bad(key, "must be positive")
        for key in ("explore_noise", "obs_noise_std", "action_noise_std", "dense_weight"):
            if not getattr(self, key) >= 0.0:
                bad(key, "must be non-negative")
        if not 0.0 <= self.random_eps <= 1.0:
            bad("random_eps", "must lie in [0, 1]")
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            bad("hidden_sizes", "must be a non-empty list of positive integers")
        if self.convention not in CONVENTIONS:
            bad("convention", f"must be one of {', '.join(CONVENTIONS)}")
        if set(self.transfer_parts) - {"actor", "critic"}:
            bad("transfer_parts", "may only contain actor and critic")
        if self.partial_relabel and self.env != "lift":
            bad("partial_relabel", "only applies to the lift environment")
        return self

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes).validate()


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_DEFAULTS = RunConfig()


def _parse_value(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    default = getattr(_DEFAULTS, key)
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if isinstance(default, tuple):
            items = [s for s in raw.replace(",", " ").split() if s]
            if key == "hidden_sizes":
                return tuple(int(s) for s in items)
            return tuple(items)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; unknown keys are errors, missing keys keep defaults."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw)
    return RunConfig(**values).validate()


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)


def serialize_config(config: RunConfig) -> str:
    return "".join(f"{f.name} = {_format_value(getattr(config, f.name))}\n" for f in fields(RunConfig))


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())
