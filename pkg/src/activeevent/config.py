"""Run configuration and the dotted key-value config file format.

Example::

    # desk defaults
    env.world_size = 8.0
    env.event_dwell_range = 40, 120
    dqn.reward_mode = hybrid
    run.total_steps = 50000
"""

from __future__ import annotations

import dataclasses
import types
import typing
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .controller import DQNConfig
from .env import EnvConfig
from .errors import ConfigError
from .events import SegmenterConfig
from .perception import PerceptionConfig


@dataclass
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    dqn: DQNConfig = field(default_factory=DQNConfig)
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    total_steps: int = 50_000
    phase1_steps: int = 10_000
    episode_horizon: int = 500
    eval_episodes: int = 20
    checkpoint_every: int = 10_000
    log_every: int = 500
    out_dir: str = "runs/default"
    master_seed: int = 0

    def validate(self) -> None:
        self.env.validate()
        self.perception.validate()
        self.dqn.validate()
        self.segmenter.validate()
        if not 0 <= self.phase1_steps <= self.total_steps:
            raise ConfigError("run.phase1_steps", "need 0 <= phase1_steps <= total_steps")
        if self.episode_horizon < 1:
            raise ConfigError("run.episode_horizon", "must be >= 1")
        if self.checkpoint_every < 1 or self.log_every < 1:
            raise ConfigError("run.checkpoint_every", "intervals must be positive")
        if self.master_seed < 0:
            raise ConfigError("run.master_seed", "must be unsigned")


SECTIONS = ("env", "perception", "dqn", "segmenter")


def derive_seed(master_seed: int, tag: str) -> int:
    """Stable 63-bit sub-seed for a named component."""
    ss = np.random.SeedSequence([int(master_seed), zlib.crc32(tag.encode("utf-8"))])
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))


def _coerce(value: str, tp, key: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    try:
        if tp is bool:
            low = value.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if tp is int:
            return int(value)
        if tp is float:
            return float(value)
        if tp is str:
            return value.strip("\"'")
        if origin is tuple:
            parts = [p for p in value.replace("(", "").replace(")", "").split(",") if p.strip()]
            if len(parts) != len(args):
                raise ValueError(value)
            return tuple(_coerce(p.strip(), a, key) for a, p in zip(args, parts))
        if origin in (typing.Union, types.UnionType):
            if value.lower() in ("none", "null", ""):
                return None
            inner = [a for a in args if a is not type(None)][0]
            return _coerce(value, inner, key)
    except ValueError:
        raise ConfigError(key, f"cannot parse {value!r}") from None
    raise ConfigError(key, f"unsupported field type {tp}")


def _set(obj, name: str, value: str, key: str) -> None:
    hints = typing.get_type_hints(type(obj))
    if name not in hints or name in SECTIONS:
        raise ConfigError(key, "unknown key")
    setattr(obj, name, _coerce(value, hints[name], key))


def parse_config_text(text: str) -> RunConfig:
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        section, _, name = key.rpartition(".")
        if section in SECTIONS:
            _set(getattr(cfg, section), name, value, key)
        elif section in ("", "run"):
            _set(cfg, name, value, key)
        else:
            raise ConfigError(key, "unknown section")
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if v is None:
        return "none"
    return repr(v) if isinstance(v, float) else str(v)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for section in SECTIONS:
        sub = getattr(cfg, section)
        for f in dataclasses.fields(sub):
            lines.append(f"{section}.{f.name} = {_fmt(getattr(sub, f.name))}")
    for f in dataclasses.fields(cfg):
        if f.name not in SECTIONS:
            lines.append(f"run.{f.name} = {_fmt(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"
