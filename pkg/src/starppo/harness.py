"""Experiment runner: scheme comparison, element sweep and evaluation traces.

Directory layout written by :func:`run_scheme` for each seed::

    <out>/<scheme>/N<n>/seed<s>/
        manifest.json  metrics.csv  final.npz  eval_rates.csv  [ckpt_<batch>.npz]
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, env_from_dict, to_dict
from .env import EnvConfig, Scheme, StarRisEnv
from .nn import CheckpointError
from .ppo import METRIC_COLUMNS, Agent, load_agent, save_agent, train

log = logging.getLogger(__name__)

SCHEME_ORDER = (Scheme.DEPLOYMENT, Scheme.FIXED_POSITION, Scheme.FIXED_POSE, Scheme.NO_RIS)


@dataclass
class MetricsRecord:
    scheme: str
    seed: int
    n_elements: int
    batch: int
    env_steps: int
    mean_sum_rate: float         # deterministic-policy evaluation, bits/s per TS
    train_sum_rate: float        # mean over the last 10% of training batches
    user_rates: list[float]

    def row(self) -> dict:
        d = dataclasses.asdict(self)
        rates = d.pop("user_rates")
        d.update({f"rate_user{k}": r for k, r in enumerate(rates)})
        return d


def write_csv(path: Path, rows: list[dict], columns=None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = list(columns or (rows[0].keys() if rows else []))
    try:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=columns)
            w.writeheader()
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc


def read_csv(path: Path) -> list[dict]:
    """Parse a CSV written by this module back into numbers where possible."""
    def conv(v: str):
        for typ in (int, float):
            try:
                return typ(v)
            except ValueError:
                pass
        return v
    with open(path, newline="") as fh:
        return [{k: conv(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def run_dir(cfg: ExperimentConfig, scheme: Scheme, seed: int) -> Path:
    return cfg.out_dir / scheme.value / f"N{cfg.env.n}" / f"seed{seed}"


def env_factory(env_cfg: EnvConfig):
    return lambda s: StarRisEnv(env_cfg, s)


def _checkpoint_meta(env_cfg: EnvConfig, cfg: ExperimentConfig, seed: int, batch: int,
                     rng_state: dict | None = None) -> dict:
    d = to_dict(cfg.replace(env=env_cfg))
    meta = {"config": d, "seed": seed, "batch": batch, "scheme": env_cfg.scheme.value,
            "package_version": __version__}
    if rng_state is not None:
        meta["rng_state"] = rng_state
    return meta


def train_one(cfg: ExperimentConfig, scheme: Scheme, seed: int) -> tuple[Agent, list[dict], Path]:
    env_cfg = dataclasses.replace(cfg.env, scheme=scheme)
    out = run_dir(cfg, scheme, seed)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"seed": seed, "scheme": scheme.value, "package_version": __version__,
                "config": to_dict(cfg.replace(env=env_cfg))}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))

    metrics_path = out / "metrics.csv"
    with open(metrics_path, "w", newline="") as fh:
        csv.DictWriter(fh, fieldnames=METRIC_COLUMNS).writeheader()

    last_rng: dict = {}

    def on_batch(record: dict, agent: Agent, rng_state: dict) -> None:
        last_rng.update(rng_state)
        with open(metrics_path, "a", newline="") as fh:
            csv.DictWriter(fh, fieldnames=METRIC_COLUMNS).writerow(record)
        b = record["batch"] + 1
        if cfg.checkpoint_every and b % cfg.checkpoint_every == 0:
            save_agent(out / f"ckpt_{b:05d}.npz", agent,
                       _checkpoint_meta(env_cfg, cfg, seed, b, rng_state))

    result = train(env_factory(env_cfg), cfg.hyper, seed, on_batch)
    save_agent(out / "final.npz", result.agent,
               _checkpoint_meta(env_cfg, cfg, seed, len(result.metrics), last_rng))
    return result.agent, result.metrics, out


def rollout(agent: Agent, env_cfg: EnvConfig, episodes: int, seed: int) -> list[dict]:
    """Deterministic (mean-action) rollouts; one row per time slot.

    Episode ``e`` resets its environment with seed ``seed + e`` so traces are
    paired across agents and schemes.
    """
    env = StarRisEnv(env_cfg)
    rows = []
    for ep in range(episodes):
        obs = env.reset(seed + ep)
        done = False
        while not done:
            res = env.step(np.clip(agent.act(obs), -1.0, 1.0))
            row = {"episode": ep, "t": res.info["t"], "reward": res.reward}
            row.update({f"rate_user{k}": float(r) for k, r in enumerate(res.info["rates"])})
            ris, ori = res.info["ris"], res.info["ori"]
            row.update({"ris_x": ris.x, "ris_y": ris.y, "ori_x": ori.x_ori, "ori_y": ori.y_ori})
            rows.append(row)
            obs, done = res.obs, res.done
    return rows


def summarize(rows: list[dict], k: int) -> tuple[float, list[float]]:
    mean = float(np.mean([r["reward"] for r in rows]))
    users = [float(np.mean([r[f"rate_user{u}"] for r in rows])) for u in range(k)]
    return mean, users


def run_scheme(cfg: ExperimentConfig, scheme: Scheme | None = None) -> list[MetricsRecord]:
    """Train and evaluate one scheme for every seed in ``cfg.seeds``."""
    scheme = Scheme(scheme or cfg.env.scheme)
    env_cfg = dataclasses.replace(cfg.env, scheme=scheme)
    records = []
    for seed in cfg.seeds:
        log.info("training %s N=%d seed=%d", scheme.value, cfg.env.n, seed)
        agent, metrics, out = train_one(cfg, scheme, seed)
        rows = rollout(agent, env_cfg, cfg.eval_episodes, cfg.eval_seed)
        write_csv(out / "eval_rates.csv", rows)
        mean, users = summarize(rows, env_cfg.k)
        tail = metrics[-max(1, len(metrics) // 10):]
        records.append(MetricsRecord(
            scheme=scheme.value, seed=seed, n_elements=env_cfg.n, batch=len(metrics),
            env_steps=metrics[-1]["env_steps"], mean_sum_rate=mean,
            train_sum_rate=float(np.mean([m["mean_sum_rate"] for m in tail])),
            user_rates=users))
    return records


def compare(cfg: ExperimentConfig, schemes=SCHEME_ORDER) -> dict[str, list[MetricsRecord]]:
    """All schemes on identical seeds and initial RIS pose (paired comparison)."""
    out = {}
    for scheme in schemes:
        out[Scheme(scheme).value] = run_scheme(cfg, scheme)
    rows = [r.row() for recs in out.values() for r in recs]
    write_csv(cfg.out_dir / "compare_summary.csv", rows)
    return out


def sweep_elements(cfg: ExperimentConfig, ns=None) -> list[MetricsRecord]:
    ns = list(ns if ns is not None else cfg.elements)
    records = []
    for n in ns:
        sub = cfg.with_env(n=n, channel=dataclasses.replace(cfg.env.channel, n_x=None))
        sub.env.validate()
        records.extend(run_scheme(sub))
    write_csv(cfg.out_dir / "sweep_summary.csv", [r.row() for r in records])
    return records


def evaluate(checkpoint, episodes: int, seed: int, out_csv=None) -> list[dict]:
    """Per-TS per-user rate traces for a saved agent under its own config."""
    agent, meta = load_agent(checkpoint)
    try:
        c = meta["config"]
        env_cfg = env_from_dict({**c["env"], "channel": c["channel"], "mobility": c["mobility"]})
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"{checkpoint}: checkpoint lacks an environment config") from exc
    if agent.policy.actor.n_in != env_cfg.obs_dim:
        raise CheckpointError(f"{checkpoint}: network input does not match its config")
    rows = rollout(agent, env_cfg, episodes, seed)
    if out_csv is not None:
        write_csv(Path(out_csv), rows)
    return rows


def seed_means(records: list[MetricsRecord], attr: str = "mean_sum_rate") -> dict[int, float]:
    return {r.seed: getattr(r, attr) for r in records}
