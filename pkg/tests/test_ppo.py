import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from starppo import nn
from starppo.env import StepResult
from starppo.ppo import (LOG_2PI, Agent, GaussianPolicy, PpoHyper, TrainingDiverged,
                         actor_loss_and_grad, clip_g, clipped_loss, critic_loss_and_grad,
                         gae, gaussian_logp, load_agent, sample_action, save_agent,
                         surrogate_terms, train, value_loss)

from .test_nn import fd_check


def monte_carlo_advantage(rewards, values, gamma):
    """Discounted rewards to the end of the segment plus the bootstrap value."""
    T = len(rewards)
    out = []
    for t in range(T):
        ret = sum(gamma ** (i - t) * rewards[i] for i in range(t, T))
        out.append(-values[t] + ret + gamma ** (T - t) * values[T])
    return np.array(out)


def tiny_policy(rng, obs=4, act=3, hidden=8):
    actor = nn.init_mlp(obs, act, rng, hidden=hidden, out_gain=1.0, out_tanh=True)
    return GaussianPolicy(actor, rng.normal(size=act) * 0.3)


# -- GAE ----------------------------------------------------------------------

def test_gae_single_step():
    adv, ret = gae([1.0], [0.0, 0.0], [False], 0.99, 0.95)
    np.testing.assert_array_equal(adv, [1.0])
    np.testing.assert_array_equal(ret, [1.0])


def test_gae_zero_inputs():
    adv, ret = gae(np.zeros(7), np.zeros(8), np.zeros(7), 0.9, 0.8)
    assert np.all(adv == 0) and np.all(ret == 0)


def test_gae_lambda_one_is_monte_carlo():
    rng = np.random.default_rng(0)
    for _ in range(100):
        T = int(rng.integers(1, 60))
        r, v = rng.normal(size=T), rng.normal(size=T + 1)
        gamma = float(rng.uniform(0.5, 1.0))
        adv, ret = gae(r, v, np.zeros(T), gamma, 1.0)
        np.testing.assert_allclose(adv, monte_carlo_advantage(r, v, gamma), rtol=0, atol=1e-10)
        np.testing.assert_allclose(ret, adv + v[:-1])


def test_gae_done_cuts_bootstrap():
    r = np.array([1.0, 2.0, 3.0])
    v = np.array([0.5, 0.5, 9.0, 4.0])
    adv, _ = gae(r, v, [False, True, False], 0.9, 0.95)
    # second step ends its episode: no bootstrap from v[2]
    assert adv[1] == pytest.approx(2.0 - 0.5)
    assert adv[2] == pytest.approx(3.0 + 0.9 * 4.0 - 9.0)
    assert adv[0] == pytest.approx((1.0 + 0.9 * 0.5 - 0.5) + 0.9 * 0.95 * adv[1])


def test_gae_vectorised_columns():
    rng = np.random.default_rng(1)
    r, v = rng.normal(size=(10, 3)), rng.normal(size=(11, 3))
    d = rng.random((10, 3)) < 0.2
    adv, _ = gae(r, v, d, 0.99, 0.9)
    for j in range(3):
        np.testing.assert_allclose(adv[:, j], gae(r[:, j], v[:, j], d[:, j], 0.99, 0.9)[0])


def test_gae_length_mismatch():
    with pytest.raises(ValueError):
        gae(np.zeros(3), np.zeros(3), np.zeros(3), 0.9, 0.9)


# -- surrogate / value losses ----------------------------------------------------

def test_clip_function_branches():
    assert clip_g(0.2, 2.0) == 2.4
    assert clip_g(0.2, -1.0) == -0.8


def test_clipped_loss_examples():
    adv = np.array([0.5, -1.0, 2.0])
    assert clipped_loss(np.zeros(3), np.zeros(3), adv, 0.2) == pytest.approx(-adv.mean())
    _, _, obj = surrogate_terms(np.log([2.0]), [0.0], np.array([2.0]), 0.2)
    assert obj[0] == pytest.approx(2.4)
    _, _, obj = surrogate_terms(np.log([0.5]), [0.0], np.array([-1.0]), 0.2)
    assert obj[0] == pytest.approx(-0.8)


@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-5, 5)), min_size=1, max_size=20),
       st.floats(0.01, 0.99))
def test_clipped_objective_is_lower_bound(pairs, eps):
    dlogp, adv = map(np.array, zip(*pairs))
    ratio, unclipped, obj = surrogate_terms(dlogp, np.zeros_like(dlogp), adv, eps)
    assert np.all(obj <= unclipped)


def test_value_loss_examples():
    assert value_loss([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert value_loss(np.arange(4) + 1.0, np.arange(4)) == 1.0
    assert value_loss([0.0, 2.0], [1.0, 1.0]) == 1.0


# -- policy -------------------------------------------------------------------

def test_sample_deterministic_limit():
    rng = np.random.default_rng(0)
    pol = tiny_policy(rng)
    pol = GaussianPolicy(pol.actor, np.full(3, -60.0))
    s = rng.normal(size=4)
    smp = sample_action(pol, s, rng)
    assert np.array_equal(smp.action, pol.mean(s))


def test_logp_at_mode():
    log_std = np.array([0.1, -0.4, 0.0])
    mu = np.array([0.2, -0.3, 0.9])
    assert gaussian_logp(mu, mu, log_std) == pytest.approx(np.sum(-log_std - 0.5 * LOG_2PI))


def test_logp_matches_scipy():
    rng = np.random.default_rng(3)
    mu, ls, x = rng.normal(size=5), rng.normal(size=5) * 0.5, rng.normal(size=5)
    assert gaussian_logp(x, mu, ls) == pytest.approx(
        stats.norm.logpdf(x, mu, np.exp(ls)).sum(), rel=1e-12)


def test_sample_mean_matches_censored_gaussian():
    rng = np.random.default_rng(4)
    pol = tiny_policy(rng)
    pol = GaussianPolicy(pol.actor, np.log(np.array([0.3, 1.0, 2.0])))
    s = rng.normal(size=4)
    mu, sd = pol.mean(s), pol.std
    draws = np.stack([sample_action(pol, s, rng).action for _ in range(10_000)])
    a, b = (-1 - mu) / sd, (1 - mu) / sd
    expect = (-stats.norm.cdf(a) + stats.norm.sf(b)
              + mu * (stats.norm.cdf(b) - stats.norm.cdf(a))
              + sd * (stats.norm.pdf(a) - stats.norm.pdf(b)))
    se = draws.std(axis=0) / np.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - expect) < 3 * se)
    assert np.all(np.abs(draws) <= 1)


def test_first_ratio_is_one():
    rng = np.random.default_rng(5)
    pol = tiny_policy(rng)
    s = rng.normal(size=(32, 4))
    smp = sample_action(pol, s, rng)
    _, _, diag = actor_loss_and_grad(pol, s, smp.raw, smp.logp, rng.normal(size=32), 0.2)
    np.testing.assert_allclose(diag["ratio"], 1.0, rtol=0, atol=1e-12)


@pytest.mark.parametrize("ent", [0.0, 0.01])
def test_actor_loss_gradient_finite_differences(ent):
    rng = np.random.default_rng(6)
    pol = tiny_policy(rng, hidden=nn.HIDDEN)
    s = rng.normal(size=(16, 4))
    smp = sample_action(pol, s, rng)
    # shift the old log-probs so that some samples sit in the clipped region
    logp_old = smp.logp + rng.normal(size=16) * 0.3
    adv = rng.normal(size=16)
    params = pol.tensors()

    def loss():
        return actor_loss_and_grad(pol.with_tensors(params), s, smp.raw, logp_old, adv, 0.2, ent)[0]

    _, grads, _ = actor_loss_and_grad(pol, s, smp.raw, logp_old, adv, 0.2, ent)
    fd_check(loss, params, grads)


def test_critic_loss_gradient_finite_differences():
    rng = np.random.default_rng(7)
    critic = nn.init_mlp(4, 1, rng, hidden=nn.HIDDEN)
    s, ret = rng.normal(size=(16, 4)), rng.normal(size=16)
    params = critic.tensors()
    _, grads = critic_loss_and_grad(critic, s, ret)
    fd_check(lambda: critic_loss_and_grad(critic.with_tensors(params), s, ret)[0], params, grads)


# -- training loop ------------------------------------------------------------

class Bandit:
    """Contextual bandit: reward is minus the squared distance to tanh(0.8 s[:3])."""
    obs_dim, action_dim = 4, 3

    def __init__(self, seed, horizon=10, poison=False):
        self.rng = np.random.default_rng(seed)
        self.horizon, self.poison = horizon, poison

    def reset(self):
        self.t = 0
        self.s = self.rng.uniform(-1, 1, 4)
        return self.s.copy()

    def step(self, a):
        r = -float(np.sum((a - np.tanh(0.8 * self.s[:3])) ** 2))
        if self.poison:
            r = float("nan")
        self.t += 1
        self.s = self.rng.uniform(-1, 1, 4)
        return StepResult(self.s.copy(), r, self.t >= self.horizon, {})


SMALL_H = dict(batch_size=512, minibatch_size=128, n_envs=4, reward_scale=1.0, epochs=4)


def test_zero_lr_leaves_parameters():
    h = PpoHyper(total_steps=1024, lr=0.0, critic_lr=0.0, **SMALL_H)
    ref = Agent.create(4, 3, h, np.random.default_rng(np.random.SeedSequence(0).spawn(4)[0]))
    res = train(Bandit, h, 0)
    for k, v in ref.policy.tensors().items():
        assert np.array_equal(res.agent.policy.tensors()[k], v)
    for k, v in ref.critic.tensors().items():
        assert np.array_equal(res.agent.critic.tensors()[k], v)


def test_metrics_length_and_determinism():
    h = PpoHyper(total_steps=512 * 3, **SMALL_H)
    a = train(Bandit, h, 1).metrics
    b = train(Bandit, h, 1).metrics
    assert len(a) == 3
    assert a == b
    assert [m["env_steps"] for m in a] == [512, 1024, 1536]
    assert a != train(Bandit, h, 2).metrics


def test_training_improves_bandit():
    h = PpoHyper(total_steps=512 * 40, **SMALL_H)
    m = train(Bandit, h, 3).metrics
    first = np.mean([x["mean_sum_rate"] for x in m[:4]])
    last = np.mean([x["mean_sum_rate"] for x in m[-4:]])
    assert last > first + 0.5
    assert m[-1]["mean_std"] < m[0]["mean_std"]


def test_non_finite_loss_aborts():
    h = PpoHyper(total_steps=512, **SMALL_H)
    with pytest.raises(TrainingDiverged) as info:
        train(lambda s: Bandit(s, poison=True), h, 0)
    assert info.value.record["batch"] == 0


def test_on_batch_hook_and_agent_roundtrip(tmp_path):
    h = PpoHyper(total_steps=1024, **SMALL_H)
    seen = []
    res = train(Bandit, h, 0, on_batch=lambda rec, agent, rs: seen.append((rec["batch"], sorted(rs))))
    assert seen == [(0, ["act", "shuffle"]), (1, ["act", "shuffle"])]
    path = tmp_path / "agent.npz"
    save_agent(path, res.agent, {"note": "x"})
    agent, meta = load_agent(path)
    assert meta["note"] == "x"
    for a, b in ((agent.policy.tensors(), res.agent.policy.tensors()),
                 (agent.critic.tensors(), res.agent.critic.tensors()),
                 (agent.actor_opt.m, res.agent.actor_opt.m),
                 (agent.critic_opt.v, res.agent.critic_opt.v)):
        assert a.keys() == b.keys()
        assert all(np.array_equal(a[k], b[k]) for k in a)
    assert agent.actor_opt.step == res.agent.actor_opt.step


def test_hyper_validation():
    with pytest.raises(ValueError):
        PpoHyper(batch_size=100, minibatch_size=30).validate()
    with pytest.raises(ValueError):
        PpoHyper(gamma=0.0).validate()
    with pytest.raises(ValueError):
        PpoHyper(clip_eps=1.0).validate()
    assert PpoHyper(batch_size=2048, total_steps=200_000).n_batches == 97
    assert math.isclose(PpoHyper().value_lr, 3e-4)
