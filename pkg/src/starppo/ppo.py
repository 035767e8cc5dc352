"""PPO with a diagonal Gaussian policy, truncated GAE and a clipped surrogate."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import nn

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


class TrainingDiverged(RuntimeError):
    def __init__(self, record: dict):
        super().__init__(f"non-finite loss at batch {record.get('batch')}: {record}")
        self.record = record


@dataclass
class PpoHyper:
    batch_size: int = 8192
    minibatch_size: int = 256
    gamma: float = 0.99
    clip_eps: float = 0.2
    lr: float = 3e-4
    critic_lr: float | None = None
    gae_lambda: float = 0.95
    epochs: int = 10
    total_steps: int = 1_000_000
    entropy_coef: float = 0.0
    init_log_std: float = 0.0
    n_envs: int = 8
    reward_scale: float = 1e-4
    hidden: int = nn.HIDDEN

    def validate(self) -> None:
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0 < self.clip_eps < 1:
            raise ValueError("clip_eps must lie in (0, 1)")
        if not 0 < self.gae_lambda <= 1:
            raise ValueError("gae_lambda must lie in (0, 1]")
        if self.batch_size % self.minibatch_size:
            raise ValueError("minibatch_size must divide batch_size")
        if self.batch_size % self.n_envs:
            raise ValueError("n_envs must divide batch_size")
        if self.total_steps < self.batch_size:
            raise ValueError("total_steps must be at least one batch")

    @property
    def n_batches(self) -> int:
        return self.total_steps // self.batch_size

    @property
    def value_lr(self) -> float:
        return self.lr if self.critic_lr is None else self.critic_lr


# -- policy -----------------------------------------------------------------

@dataclass
class GaussianPolicy:
    actor: nn.MlpParams
    log_std: np.ndarray

    def tensors(self) -> dict[str, np.ndarray]:
        return {**self.actor.tensors(), "log_std": self.log_std}

    def with_tensors(self, t: dict[str, np.ndarray]) -> "GaussianPolicy":
        return GaussianPolicy(self.actor.with_tensors(t), t["log_std"])

    def mean(self, s: np.ndarray) -> np.ndarray:
        return nn.forward(self.actor, s)[0]

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)


class Sample(NamedTuple):
    action: np.ndarray  # clamped to [-1, 1], what the environment executes
    raw: np.ndarray     # pre-clamp Gaussian draw, used for likelihood ratios
    logp: np.ndarray


def gaussian_logp(x: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    z = (x - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z * z - log_std - 0.5 * LOG_2PI, axis=-1)


def sample_action(pol: GaussianPolicy, s: np.ndarray, rng: np.random.Generator) -> Sample:
    mu = pol.mean(s)
    raw = mu + pol.std * rng.standard_normal(mu.shape)
    return Sample(np.clip(raw, -1.0, 1.0), raw, gaussian_logp(raw, mu, pol.log_std))


# -- advantage and losses ---------------------------------------------------

def gae(rewards, values, dones, gamma: float, lam: float):
    """Truncated GAE, computed right to left.

    ``values`` carries one more row than ``rewards`` (the bootstrap value of
    the state after the last step). ``dones[t]`` marks that the episode ended
    with step t, cutting both bootstrap and accumulation. Works on 1-D
    sequences or (T, n_envs) arrays. Returns (advantages, returns).
    """
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    d = np.asarray(dones, dtype=float)
    if v.shape[0] != r.shape[0] + 1 or d.shape != r.shape or v.shape[1:] != r.shape[1:]:
        raise ValueError(f"shape mismatch: rewards {r.shape}, values {v.shape}, dones {d.shape}")
    adv = np.zeros_like(r)
    acc = np.zeros(r.shape[1:])
    for t in range(r.shape[0] - 1, -1, -1):
        live = 1.0 - d[t]
        delta = r[t] + gamma * v[t + 1] * live - v[t]
        acc = delta + gamma * lam * live * acc
        adv[t] = acc
    return adv, adv + v[:-1]


def clip_g(eps: float, adv):
    adv = np.asarray(adv, dtype=float)
    return np.where(adv >= 0, (1.0 + eps) * adv, (1.0 - eps) * adv)


def surrogate_terms(logp_new, logp_old, adv, eps: float):
    ratio = np.exp(np.asarray(logp_new) - np.asarray(logp_old))
    unclipped = ratio * adv
    return ratio, unclipped, np.minimum(unclipped, clip_g(eps, adv))


def clipped_loss(logp_new, logp_old, adv, eps: float) -> float:
    """Negated mean clipped surrogate (minimise to ascend the objective)."""
    return -float(np.mean(surrogate_terms(logp_new, logp_old, adv, eps)[2]))


def value_loss(v_pred, returns) -> float:
    diff = np.asarray(v_pred, dtype=float) - np.asarray(returns, dtype=float)
    return float(np.mean(diff * diff))


def actor_loss_and_grad(pol: GaussianPolicy, states, raw_actions, logp_old, adv,
                        eps: float, entropy_coef: float = 0.0):
    mu, cache = nn.forward(pol.actor, states)
    inv_var = np.exp(-2.0 * pol.log_std)
    diff = raw_actions - mu
    logp = gaussian_logp(raw_actions, mu, pol.log_std)
    ratio, unclipped, obj = surrogate_terms(logp, logp_old, adv, eps)
    n = len(adv)
    entropy = float(np.sum(pol.log_std + 0.5 * (1.0 + LOG_2PI)))
    loss = -float(np.mean(obj)) - entropy_coef * entropy
    # d obj / d logp is ratio*A where the unclipped arm attains the min, else 0
    active = unclipped <= clip_g(eps, adv)
    dlogp = np.where(active, -ratio * adv / n, 0.0)
    d_mu = dlogp[:, None] * diff * inv_var
    grads = nn.backward(pol.actor, cache, d_mu)
    grads["log_std"] = (dlogp[:, None] * (diff * diff * inv_var - 1.0)).sum(axis=0) - entropy_coef
    clip_frac = float(np.mean(np.abs(ratio - 1.0) > eps))
    return loss, grads, {"clip_fraction": clip_frac, "ratio": ratio}


def critic_loss_and_grad(critic: nn.MlpParams, states, returns):
    v, cache = nn.forward(critic, states)
    v = v[:, 0]
    diff = v - returns
    grads = nn.backward(critic, cache, (2.0 * diff / len(diff))[:, None])
    return float(np.mean(diff * diff)), grads


# -- agent and training loop ------------------------------------------------

@dataclass
class Agent:
    policy: GaussianPolicy
    critic: nn.MlpParams
    actor_opt: nn.AdamState
    critic_opt: nn.AdamState

    @classmethod
    def create(cls, obs_dim: int, act_dim: int, hyper: PpoHyper,
               rng: np.random.Generator) -> "Agent":
        actor = nn.init_mlp(obs_dim, act_dim, rng, hyper.hidden, out_gain=0.01, out_tanh=True)
        critic = nn.init_mlp(obs_dim, 1, rng, hyper.hidden, out_gain=1.0)
        pol = GaussianPolicy(actor, np.full(act_dim, float(hyper.init_log_std)))
        return cls(pol, critic, nn.AdamState.zeros_like(pol.tensors()),
                   nn.AdamState.zeros_like(critic.tensors()))

    def value(self, s: np.ndarray) -> np.ndarray:
        return nn.forward(self.critic, s)[0][..., 0]

    def act(self, s: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        """Mean action when ``rng`` is None, else a clamped sample."""
        if rng is None:
            return self.policy.mean(s)
        return sample_action(self.policy, s, rng).action


def _opt_groups(prefix: str, s: nn.AdamState) -> dict[str, dict[str, np.ndarray]]:
    return {f"{prefix}_m": s.m, f"{prefix}_v": s.v}


def save_agent(path, agent: Agent, meta: dict) -> None:
    groups = {"actor": agent.policy.tensors(), "critic": agent.critic.tensors(),
              **_opt_groups("actor_opt", agent.actor_opt),
              **_opt_groups("critic_opt", agent.critic_opt)}
    meta = {**meta, "actor_opt_step": agent.actor_opt.step,
            "critic_opt_step": agent.critic_opt.step}
    nn.save_checkpoint(path, groups, meta)


def load_agent(path) -> tuple[Agent, dict]:
    groups, meta = nn.load_checkpoint(path)
    try:
        a, c = groups["actor"], groups["critic"]
        actor = nn.MlpParams(a["w1"], a["b1"], a["w2"], a["b2"], out_tanh=True)
        critic = nn.MlpParams(c["w1"], c["b1"], c["w2"], c["b2"])
        agent = Agent(
            GaussianPolicy(actor, a["log_std"]), critic,
            nn.AdamState(groups["actor_opt_m"], groups["actor_opt_v"], meta["actor_opt_step"]),
            nn.AdamState(groups["critic_opt_m"], groups["critic_opt_v"], meta["critic_opt_step"]),
        )
    except KeyError as exc:
        raise nn.CheckpointError(f"{path}: missing entry {exc}") from exc
    return agent, meta


METRIC_COLUMNS = ("batch", "env_steps", "mean_episode_reward", "mean_sum_rate",
                  "actor_loss", "critic_loss", "clip_fraction", "mean_std")


@dataclass
class TrainResult:
    agent: Agent
    metrics: list[dict] = field(default_factory=list)


def _normalize(x: np.ndarray) -> np.ndarray:
    return (x - x.mean()) / (x.std() + 1e-8)


def train(env_factory: Callable[[int], object], hyper: PpoHyper, seed: int,
          on_batch: Callable[[dict, Agent, dict], None] | None = None) -> TrainResult:
    """Run PPO. ``env_factory(seed)`` must return an environment exposing
    ``reset()``, ``step(a)`` and ``obs_dim``/``action_dim``.

    ``on_batch(record, agent, rng_state)`` is called after every update phase;
    ``rng_state`` holds the bit-generator states of the sampling and shuffling
    streams so a checkpoint can record them.

    Seeds are split into independent streams for initialisation, action
    sampling, minibatch shuffling and one per environment, so two runs that
    differ only in environment dynamics see the same random numbers.
    """
    hyper.validate()
    ss = np.random.SeedSequence(seed)
    init_ss, act_ss, shuffle_ss, env_ss = ss.spawn(4)
    act_rng = np.random.default_rng(act_ss)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    env_seeds = [int(s.generate_state(1)[0]) for s in env_ss.spawn(hyper.n_envs)]
    envs = [env_factory(s) for s in env_seeds]
    obs_dim, act_dim = envs[0].obs_dim, envs[0].action_dim
    agent = Agent.create(obs_dim, act_dim, hyper, np.random.default_rng(init_ss))

    E = hyper.n_envs
    steps = hyper.batch_size // E
    obs = np.stack([env.reset() for env in envs])
    ep_ret = np.zeros(E)
    result = TrainResult(agent)
    env_steps = 0

    for b in range(hyper.n_batches):
        buf_s = np.empty((steps, E, obs_dim))
        buf_a = np.empty((steps, E, act_dim))
        buf_lp = np.empty((steps, E))
        buf_r = np.empty((steps, E))
        buf_v = np.empty((steps + 1, E))
        buf_d = np.zeros((steps, E))
        finished: list[float] = []
        for t in range(steps):
            smp = sample_action(agent.policy, obs, act_rng)
            buf_s[t], buf_a[t], buf_lp[t] = obs, smp.raw, smp.logp
            buf_v[t] = agent.value(obs)
            for i, env in enumerate(envs):
                res = env.step(smp.action[i])
                buf_r[t, i] = res.reward
                ep_ret[i] += res.reward
                if res.done:
                    buf_d[t, i] = 1.0
                    finished.append(ep_ret[i])
                    ep_ret[i] = 0.0
                    obs[i] = env.reset()
                else:
                    obs[i] = res.obs
        buf_v[steps] = agent.value(obs)
        env_steps += steps * E

        adv, ret = gae(buf_r * hyper.reward_scale, buf_v, buf_d, hyper.gamma, hyper.gae_lambda)
        flat = lambda x: x.reshape(steps * E, *x.shape[2:])  # noqa: E731
        S, A, LP, ADV, RET = map(flat, (buf_s, buf_a, buf_lp, adv, ret))

        lr_a = hyper.lr * (1.0 - b / hyper.n_batches)
        a_losses, c_losses, clips = [], [], []
        for _ in range(hyper.epochs):
            order = shuffle_rng.permutation(hyper.batch_size)
            for start in range(0, hyper.batch_size, hyper.minibatch_size):
                idx = order[start:start + hyper.minibatch_size]
                mb_adv = _normalize(ADV[idx])
                a_loss, a_grad, diag = actor_loss_and_grad(
                    agent.policy, S[idx], A[idx], LP[idx], mb_adv,
                    hyper.clip_eps, hyper.entropy_coef)
                c_loss, c_grad = critic_loss_and_grad(agent.critic, S[idx], RET[idx])
                if not (math.isfinite(a_loss) and math.isfinite(c_loss)):
                    raise TrainingDiverged({"batch": b, "env_steps": env_steps,
                                            "actor_loss": a_loss, "critic_loss": c_loss})
                new_p, agent.actor_opt = nn.adam_update(
                    agent.policy.tensors(), a_grad, agent.actor_opt, lr_a)
                agent.policy = agent.policy.with_tensors(new_p)
                new_c, agent.critic_opt = nn.adam_update(
                    agent.critic.tensors(), c_grad, agent.critic_opt, hyper.value_lr)
                agent.critic = agent.critic.with_tensors(new_c)
                a_losses.append(a_loss)
                c_losses.append(c_loss)
                clips.append(diag["clip_fraction"])

        record = {
            "batch": b,
            "env_steps": env_steps,
            "mean_episode_reward": float(np.mean(finished)) if finished else float("nan"),
            "mean_sum_rate": float(buf_r.mean()),
            "actor_loss": float(np.mean(a_losses)),
            "critic_loss": float(np.mean(c_losses)),
            "clip_fraction": float(np.mean(clips)),
            "mean_std": float(np.mean(agent.policy.std)),
        }
        result.metrics.append(record)
        log.debug("batch %d: %s", b, record)
        if on_batch is not None:
            on_batch(record, agent, {"act": act_rng.bit_generator.state,
                                     "shuffle": shuffle_rng.bit_generator.state})
    return result


def hyper_dict(h: PpoHyper) -> dict:
    return asdict(h)
