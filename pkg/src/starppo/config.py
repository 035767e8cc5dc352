"""Experiment configuration: dataclasses, profiles and YAML round-trip.

YAML files have up to five sections (``env``, ``channel``, ``mobility``,
``ppo``, ``experiment``). Keys are the dataclass field names; the symbols
used in the system/training parameter tables (M, N, K, T, B, b, c, ...) are
accepted as aliases.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .channel import ChannelConfig
from .env import EnvConfig, Scheme
from .geometry import MobilityConfig
from .ppo import PpoHyper

ENV_ALIASES = {"M": "m", "N": "n", "K": "k", "T": "horizon", "B": "bandwidth",
               "P_max": "p_max", "bs_position": "bs", "ris_initial_position": "ris0"}
CHANNEL_ALIASES = {"Q": "rician_q", "N_x": "n_x"}
PPO_ALIASES = {"b": "batch_size", "c": "minibatch_size", "epsilon": "clip_eps",
               "lambda": "gae_lambda", "gae_lam": "gae_lambda"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    hyper: PpoHyper = field(default_factory=PpoHyper)
    seeds: list[int] = field(default_factory=lambda: [0])
    out_dir: Path = Path("runs")
    elements: list[int] = field(default_factory=lambda: [9, 16, 25])
    eval_episodes: int = 20
    eval_seed: int = 10_000
    checkpoint_every: int = 0

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def with_env(self, **kw) -> "ExperimentConfig":
        return self.replace(env=dataclasses.replace(self.env, **kw))


def full_profile() -> ExperimentConfig:
    """Full-scale system and training settings."""
    return ExperimentConfig(env=EnvConfig(), hyper=PpoHyper(batch_size=8192, total_steps=2_000_000))


def reduced_profile() -> ExperimentConfig:
    """Desk-scale profile used by the acceptance runs."""
    return ExperimentConfig(
        env=EnvConfig(m=2, n=16, k=3),
        hyper=PpoHyper(batch_size=2048, minibatch_size=256, total_steps=200_000),
        seeds=[0, 1, 2, 3, 4],
    )


PROFILES = {"full": full_profile, "reduced": reduced_profile}


def _apply(obj, section: dict, aliases: dict, where: str):
    if not section:
        return obj
    names = {f.name for f in dataclasses.fields(obj)}
    kw = {}
    for key, val in section.items():
        name = aliases.get(key, key)
        if name not in names:
            raise ConfigError(f"unknown key {key!r} in section {where!r}")
        if isinstance(val, list) and name in ("bs", "ris0"):
            val = tuple(val)
        kw[name] = val
    try:
        return dataclasses.replace(obj, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section {where!r}: {exc}") from exc


def from_dict(data: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base if base is not None else reduced_profile()
    data = data or {}
    unknown = set(data) - {"profile", "env", "channel", "mobility", "ppo", "experiment"}
    if unknown:
        raise ConfigError(f"unknown top-level sections: {sorted(unknown)}")
    if "profile" in data:
        if data["profile"] not in PROFILES:
            raise ConfigError(f"unknown profile {data['profile']!r}")
        cfg = PROFILES[data["profile"]]()
    env = _apply(cfg.env, data.get("env"), ENV_ALIASES, "env")
    env = dataclasses.replace(
        env,
        channel=_apply(env.channel, data.get("channel"), CHANNEL_ALIASES, "channel"),
        mobility=_apply(env.mobility, data.get("mobility"), {}, "mobility"),
    )
    hyper = _apply(cfg.hyper, data.get("ppo"), PPO_ALIASES, "ppo")
    cfg = _apply(cfg.replace(env=env, hyper=hyper), data.get("experiment"), {}, "experiment")
    cfg.env.validate()
    cfg.hyper.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return from_dict(data or {})


def env_to_dict(env: EnvConfig) -> dict:
    d = dataclasses.asdict(env)
    d["scheme"] = env.scheme.value
    d["bs"], d["ris0"] = list(env.bs), list(env.ris0)
    return d


def env_from_dict(d: dict) -> EnvConfig:
    d = dict(d)
    channel = ChannelConfig(**d.pop("channel"))
    mobility = MobilityConfig(**d.pop("mobility"))
    d["scheme"] = Scheme(d["scheme"])
    return EnvConfig(channel=channel, mobility=mobility, **d)


def to_dict(cfg: ExperimentConfig) -> dict:
    channel = dataclasses.asdict(cfg.env.channel)
    mobility = dataclasses.asdict(cfg.env.mobility)
    env = {k: v for k, v in env_to_dict(cfg.env).items() if k not in ("channel", "mobility")}
    return {
        "env": env,
        "channel": channel,
        "mobility": mobility,
        "ppo": dataclasses.asdict(cfg.hyper),
        "experiment": {"seeds": list(cfg.seeds), "out_dir": str(cfg.out_dir),
                       "elements": list(cfg.elements), "eval_episodes": cfg.eval_episodes,
                       "eval_seed": cfg.eval_seed, "checkpoint_every": cfg.checkpoint_every},
    }


def dump_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(to_dict(cfg), sort_keys=False))
