from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lmrk.core import Candidate, HyperParams, NetWeights, PolicyParams, RealVector
from lmrk.ec import CodingMismatch
from lmrk.evaluator import (
    DomainError, Dtlz2, EmogiConfig, EvaluationFailed, OutOfBounds, RlTrainingEvaluator, Zdt1,
    dtlz2, emogi_reward, emogi_stream, emogi_terms, normalized_score, zdt1,
)
from lmrk.mdp import spawn
from lmrk.mdp.ponglite import scripted_sparring_policy
from lmrk.rl import PpoConfig

from oracles import dtlz2_oracle, zdt1_oracle


def test_zdt1_describe_and_contract():
    ev = Zdt1()
    spec = ev.describe()
    assert spec.dim == 30 and spec.lower == (0.0,) * 30 and spec.upper == (1.0,) * 30
    assert spec.n_objectives == 2 and spec.senses == ("min", "min")
    c = ev.initialize(np.random.default_rng(0))
    assert len(ev.evaluate(c)) == 2
    with pytest.raises(CodingMismatch):
        ev.evaluate(Candidate(RealVector([0.5] * 3, [0] * 3, [1] * 3)))
    with pytest.raises(CodingMismatch):
        ev.evaluate(Candidate(NetWeights(PolicyParams())))


def test_zdt1_examples():
    assert zdt1(np.zeros(30)) == (0.0, 1.0)
    assert zdt1([1.0] + [0.0] * 29) == (1.0, 0.0)
    assert zdt1([0.25] + [0.0] * 29) == pytest.approx((0.25, 0.5))
    with pytest.raises(OutOfBounds):
        zdt1([1.5, 0.0])


def test_dtlz2_examples():
    assert dtlz2([0.0] + [0.5] * 10, 2) == pytest.approx((1.0, 0.0))
    assert dtlz2([0.5] + [0.5] * 10, 2) == pytest.approx((math.sqrt(2) / 2,) * 2)
    k = 7
    assert dtlz2([0.0] + [0.0] * k, 2) == pytest.approx((1 + 0.25 * k, 0.0))
    with pytest.raises(OutOfBounds):
        dtlz2([-0.1, 0.5, 0.5], 2)
    spec = Dtlz2().describe()
    assert spec.dim == 12 and spec.n_objectives == 3


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=30), st.integers(2, 3))
def test_benchmarks_match_oracles(x, m):
    assert zdt1(x) == pytest.approx(zdt1_oracle(x))
    assert dtlz2(x, m) == pytest.approx(dtlz2_oracle(x, m))


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.integers(2, 30))
def test_zdt1_front(f1, n):
    a, b = zdt1([f1] + [0.0] * (n - 1))
    assert b == 1 - math.sqrt(a)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=2), st.integers(0, 9))
def test_dtlz2_front_is_unit_sphere(head, k):
    f = dtlz2(head + [0.5] * (k + 1), 3)
    assert sum(v * v for v in f) == pytest.approx(1.0, abs=1e-12)


def test_emogi_examples():
    cfg = EmogiConfig()
    assert emogi_reward(True, 30, 100, cfg).values == pytest.approx((1.3, 1.7))
    assert emogi_reward(False, 0, 50, EmogiConfig(w2=0.7)).values == pytest.approx((0.0, 0.7))
    assert emogi_reward(True, 40, 40, EmogiConfig(w1=0.5)).values == pytest.approx((1.5, 1.0))
    assert emogi_reward(True, 30, 100, cfg).sense == ("max", "max")
    with pytest.raises(DomainError):
        emogi_terms(True, 5, 4, cfg)


def test_literal_laziness_form():
    cfg = EmogiConfig(laziness_form="literal")
    f1, f2 = emogi_terms(False, 2, 4, cfg)
    assert f1 == Fraction(1, 2) and f2 == 4 - Fraction(1, 2)
    with pytest.raises(ValueError):
        EmogiConfig(laziness_form="other")


@settings(max_examples=200, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=80), st.booleans(),
       st.fractions(0, 3), st.fractions(0, 3), st.sampled_from(["normalized", "literal"]))
def test_streaming_sums_equal_epoch_form(moves, won, w1, w2, form):
    cfg = EmogiConfig(w1=w1, w2=w2, laziness_form=form)
    steps = emogi_stream(moves, won, cfg)
    total = tuple(sum(s[i] for s in steps) for i in range(2))
    assert total == emogi_terms(won, sum(moves), len(moves), cfg)


def test_normalized_score_examples():
    assert normalized_score(21, 0, 21) == 1.0
    assert normalized_score(0, 21, 21) == 0.0
    assert normalized_score(10, 10, 21) == 0.5
    with pytest.raises(DomainError):
        normalized_score(5, 0, 4)
    with pytest.raises(DomainError):
        normalized_score(0, 0, 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 21), st.integers(0, 21))
def test_normalized_score_range(a, b):
    assert 0.0 <= normalized_score(a, b, 21) <= 1.0


def test_random_agent_baseline_against_sparring_policy():
    # frozen measurement: the epsilon-tracker rarely misses, so a random agent scores low
    rng = np.random.default_rng(2024)
    scores = []
    for ep in range(100):
        env, (left, right) = spawn("ponglite", seed=ep)
        while not left.done:
            right.act(scripted_sparring_policy(right.observe(), rng))
            if left.done:
                break
            left.observe()
            left.act(int(rng.integers(3)))
        s = env.state
        scores.append(normalized_score(s.score_left, s.score_right, 5))
    assert np.mean(scores) == pytest.approx(0.153, abs=0.05)


def small_rl(**kw):
    args = dict(env_name="pendulum", ppo=PpoConfig(batch_size=400, optimizer="adam",
                                                   learning_rate=1e-3, reward_scale=0.01),
                budget=800, ranges={"lr": (1e-5, 0.1)}, n_envs=2, fragment=100,
                trunk=(8,), critic=())
    args.update(kw)
    return RlTrainingEvaluator(**args)


def test_rl_evaluator_zero_budget_fails():
    ev = small_rl(budget=0)
    c = ev.initialize(np.random.default_rng(0))
    with pytest.raises(EvaluationFailed) as info:
        ev.evaluate(c, np.random.default_rng(0))
    assert info.value.candidate_id == c.id


def test_rl_evaluator_deterministic_and_carries_weights():
    ev = small_rl()
    c = ev.initialize(np.random.default_rng(0))
    twin = Candidate(c.coding)
    a = ev.run(c, np.random.default_rng(5))
    b = ev.run(twin, np.random.default_rng(5))
    assert a.objectives == b.objectives
    assert a.coding.weights is not None and a.coding.values == c.coding.values
    assert ev.describe().senses == ("max",)
    with pytest.raises(CodingMismatch):
        ev.evaluate(Candidate(HyperParams({"clip": 0.2}, {"clip": (0.1, 0.3)})))


def test_rl_evaluator_emogi_objectives():
    ev = RlTrainingEvaluator(
        env_name="ponglite", ppo=PpoConfig(batch_size=500, optimizer="adam", learning_rate=1e-3),
        budget=1000, ranges={"lr": (1e-5, 0.1), "beta": (0.0, 1.0)}, n_envs=2, fragment=250,
        trunk=(8,), critic=(), emogi=EmogiConfig(), env_config={"points_to_win": 1})
    out = ev.run(ev.initialize(np.random.default_rng(0)), np.random.default_rng(0))
    assert len(out.objectives) == 2
    assert 0.0 <= out.info["normalized_score"] <= 1.0
    assert 0.0 <= out.info["move_fraction"] <= 1.0
