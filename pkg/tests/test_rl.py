from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lmrk.core import Step, Trajectory, make_rng
from lmrk.mdp import Continuous, Discrete, spawn
from lmrk.rl import (
    Learner, MlpPolicy, NonFiniteLoss, PolicyArch, PpoConfig, TrainBatch, actor_rollout, arch_for,
    compute_gae, discounted_return, make_batch, normalize, ppo_loss,
)

from gradcheck import gradient_error, random_case


def test_discounted_return_examples():
    assert discounted_return([1], 0.5) == 1
    assert discounted_return([1, 1, 1], 0.0) == 1
    assert discounted_return([1, 1], 0.99) == pytest.approx(1.99)


def test_gae_examples():
    adv, ret = compute_gae([1], [0], 0.0, [True], 0.99, 0.95)
    assert adv.tolist() == [1] and ret.tolist() == [1]
    adv, _ = compute_gae([1, 1], [0, 0], 0.0, [False, False], 0.999999, 1.0)
    assert adv == pytest.approx([2, 1], abs=1e-5)
    adv, _ = compute_gae([1, 1], [0, 0], 0.0, [False, True], 0.99, 0.95)
    assert adv == pytest.approx([1.9405, 1])
    with pytest.raises(ValueError):
        compute_gae([1, 1], [0], 0.0, [False, False], 0.9, 0.9)


def test_gae_uses_bootstrap_unless_done():
    adv, _ = compute_gae([0.0], [0.0], 5.0, [False], 0.5, 1.0)
    assert adv.tolist() == [2.5]
    adv, _ = compute_gae([0.0], [0.0], 5.0, [True], 0.5, 1.0)
    assert adv.tolist() == [0.0]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=40))
def test_gae_reduces_to_reward_to_go(rewards):
    # gamma must be < 1 in a config, but the kernel accepts 1
    n = len(rewards)
    adv, ret = compute_gae(rewards, np.zeros(n), 0.0, [False] * n, 1.0, 1.0)
    togo = np.cumsum(rewards[::-1])[::-1]
    assert adv == pytest.approx(togo, abs=1e-9)
    assert ret == pytest.approx(togo, abs=1e-9)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=100))
def test_normalization(values):
    a = np.asarray(values)
    if a.std() < 1e-6:
        return
    z = normalize(a)
    assert abs(z.mean()) < 1e-6 and abs(z.std() - 1) < 1e-6


def one_step_case(ratio, adv, clip=0.2):
    arch = PolicyArch(1, Discrete(2), (2,), ())
    policy = MlpPolicy.init(arch, np.random.default_rng(0))
    states = np.zeros((1, 1))
    head, _, _ = policy.forward(states)
    logp = policy.log_prob(head, np.array([0]))
    batch = TrainBatch(states, np.array([0]), logp - np.log(ratio), np.array([adv]),
                       np.zeros(1), np.zeros(1, np.int64))
    return ppo_loss(batch, policy, PpoConfig(clip=clip, critic_weight=0, entropy_weight=0))


def test_clip_examples():
    assert one_step_case(1.5, 1.0).policy == pytest.approx(-1.2)
    assert one_step_case(0.5, -1.0).policy == pytest.approx(0.8)
    assert one_step_case(1.1, 1.0).policy == pytest.approx(-1.1)


def test_identity_ratio_gives_zero_policy_term():
    rng = np.random.default_rng(3)
    policy, batch, cfg = random_case(rng)
    head, _, _ = policy.forward(batch.states)
    batch.old_log_probs = policy.log_prob(head, batch.actions)
    assert abs(ppo_loss(batch, policy, cfg).policy) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_clip_inactive_inside_band(seed):
    rng = np.random.default_rng(seed)
    policy, batch, cfg = random_case(rng)
    head, _, _ = policy.forward(batch.states)
    logp = policy.log_prob(head, batch.actions)
    batch.old_log_probs = logp - np.log(rng.uniform(0.85, 1.15, size=len(batch)))
    clipped = ppo_loss(batch, policy, cfg).policy
    wide = ppo_loss(batch, policy, PpoConfig(clip=10.0, entropy_weight=cfg.entropy_weight)).policy
    assert clipped == pytest.approx(wide, abs=1e-12)


def test_gradient_check():
    rng = np.random.default_rng(11)
    for _ in range(5):
        assert gradient_error(*random_case(rng)) < 1e-4


def test_non_finite_loss():
    rng = np.random.default_rng(0)
    policy, batch, cfg = random_case(rng)
    batch.returns[0] = np.inf
    with pytest.raises(NonFiniteLoss):
        ppo_loss(batch, policy, cfg)


def tiny_batch(n=16, version=7, seed=0):
    rng = np.random.default_rng(seed)
    arch = PolicyArch(3, Continuous(1, -2, 2), (8,), ())
    steps = [Step(rng.normal(size=3), rng.normal(size=1), -1.0, 0.0, np.array([rng.normal()]), False)
             for _ in range(n)]
    return arch, make_batch([Trajectory(0, version, steps, 0.0)], PpoConfig())


def test_learner_versions_and_staleness():
    arch, batch = tiny_batch(version=7)
    learner = Learner(MlpPolicy.init(arch, np.random.default_rng(0)),
                      PpoConfig(batch_reuse=2, learning_rate=1e-3), version=7)
    res = learner.update(batch)
    assert res.packet.version == 9
    assert [r.staleness for r in res.staleness] == [1, 2]
    assert learner.gradient_steps == 2


def test_learner_broadcasts_each_update():
    arch, batch = tiny_batch(version=0)
    sent = []
    learner = Learner(MlpPolicy.init(arch, np.random.default_rng(0)), PpoConfig(),
                      broadcaster=sent.append)
    learner.update(batch)
    assert [p.version for p in sent] == [1]


def test_learner_minibatches_bump_per_step():
    arch, batch = tiny_batch(n=32, version=0)
    learner = Learner(MlpPolicy.init(arch, np.random.default_rng(0)),
                      PpoConfig(minibatches=4, optimizer="adam", learning_rate=1e-3))
    res = learner.update(batch)
    assert res.packet.version == 4
    assert sum(r.weight for r in res.staleness) == 32


def test_learner_overflow_is_non_finite():
    arch, batch = tiny_batch(version=0)
    learner = Learner(MlpPolicy.init(arch, np.random.default_rng(0)), PpoConfig(learning_rate=1e40))
    with pytest.raises(NonFiniteLoss):
        for _ in range(5):
            learner.update(batch)
    # the rejected step is rolled back, so the policy still serializes
    packet = learner.packet()
    assert all(np.isfinite(l.weight).all() for l in packet.params.layers)


def test_make_batch_normalizes_and_stamps_versions():
    rng = np.random.default_rng(0)
    pieces = []
    for v in (2, 5):
        steps = [Step(rng.normal(size=3), rng.normal(size=1), -1.0, 0.1, np.array([rng.normal()]),
                      k == 9) for k in range(10)]
        pieces.append(Trajectory(0, v, steps, 0.0))
    b = make_batch(pieces, PpoConfig())
    assert len(b) == 20
    assert abs(b.advantages.mean()) < 1e-6 and abs(b.advantages.std() - 1) < 1e-6
    assert b.sample_versions.tolist() == [2] * 10 + [5] * 10


def test_actor_rollout_examples():
    env, ctrls = spawn("pendulum", seed=0)
    arch = arch_for(env, (16,), ())
    policy = MlpPolicy.init(arch, np.random.default_rng(0))
    tr = actor_rollout(policy, env, ctrls, 1, make_rng(0, "a"), version=5)
    assert len(tr) == 1 and tr.policy_version == 5

    def run():
        env, ctrls = spawn("ponglite", seed=4)
        pol = MlpPolicy.init(arch_for(env, (16,), ()), np.random.default_rng(1))
        tr = actor_rollout(pol, env, ctrls, 300, make_rng(0, "b"))
        return [(s.state.tobytes(), s.action, s.log_prob) for s in tr.steps], tr.steps[-1].done
    a, b = run(), run()
    assert a == b


def test_rollout_stops_at_episode_end():
    env, ctrls = spawn("pendulum", {"horizon": 5}, seed=0)
    policy = MlpPolicy.init(arch_for(env, (8,), ()), np.random.default_rng(0))
    tr = actor_rollout(policy, env, ctrls, 50, make_rng(0))
    assert len(tr) == 5 and tr.steps[-1].done and tr.bootstrap_value == 0.0


def test_packet_round_trip_keeps_policy():
    env, _ = spawn("pendulum")
    arch = arch_for(env, (8, 8), (4,))
    pol = MlpPolicy.init(arch, np.random.default_rng(0))
    back = MlpPolicy.from_params(arch, pol.to_params())
    obs = np.random.default_rng(1).normal(size=(4, 3))
    assert np.allclose(back.forward(obs)[0], pol.forward(obs)[0], atol=1e-5)
