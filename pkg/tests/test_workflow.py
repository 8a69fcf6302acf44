from __future__ import annotations

import dataclasses
import json
import os

import numpy as np
import pytest

from lmrk.config import RunConfig, from_dict
from lmrk.core import Candidate, HyperParams, ObjectiveVector, RealVector, next_id
from lmrk.evaluator import Evaluator, EvaluatorSpec, Outcome
from lmrk.workflow import (
    CSV_HEADER, Collector, EvolutionRun, StaleGeneration, fixed_baseline, run, run_evolution, run_rl,
)


def cand(i):
    return Candidate(RealVector([0.5], [0.0], [1.0]), ObjectiveVector.minimize(0.0), id=i)


def test_collector_examples():
    col = Collector()
    col.open(1, 4)
    for i in (3, 1, 2):
        col.submit(1, cand(i))
    assert col.poll(1) is None
    col.submit(1, cand(0))
    got = col.poll(1)
    assert [c.id for c in got] == [0, 1, 2, 3]
    col.open(2, 1)
    with pytest.raises(StaleGeneration):
        col.submit(1, cand(9))


def test_collector_await_blocks_until_complete():
    import threading
    col = Collector()
    col.open(0, 2)
    threading.Timer(0.05, lambda: [col.submit(0, cand(i)) for i in (5, 4)]).start()
    assert [c.id for c in col.await_generation(0, timeout=5)] == [4, 5]
    with pytest.raises(StaleGeneration):
        col.submit(0, cand(6))


def evo_cfg(**sections) -> RunConfig:
    base = {"run": {"mode": "nsga2", "generations": 1, "seed": 3},
            "ec": {"population": 4}, "evaluator": {"name": "zdt1"},
            "transport": {"eval_contexts": 2}}
    for k, v in sections.items():
        base.setdefault(k, {}).update(v)
    return from_dict(base, env={})


def test_counting_small_generation():
    res = run_evolution(evo_cfg())
    assert res.evaluations == 4 and res.initial_evaluations == 4
    assert res.selections == 1 and len(res.population) == 4


def test_generations_and_liveness():
    res = run_evolution(evo_cfg(run={"generations": 5}, ec={"population": 6}))
    assert res.selections == 5 and res.evaluations == 30
    assert [r.generation for r in res.metrics.rows] == list(range(6))


class Recording:
    def __init__(self, runner):
        self.order = []
        orig = runner._collect

        def collect(g, c):
            self.order.append((g, c.id))
            orig(g, c)
        runner._collect = collect


def snapshot(pop):
    return [(c.id, c.objectives.values, tuple(c.coding.values)) for c in pop.members]


def test_selection_is_order_insensitive():
    fixed = EvolutionRun(evo_cfg(run={"generations": 3}, ec={"population": 8},
                                 transport={"eval_latency_min": 50.0, "eval_latency_max": 50.0}))
    rec_fixed = Recording(fixed)
    a = fixed.run()
    jitter = EvolutionRun(evo_cfg(run={"generations": 3}, ec={"population": 8},
                                  transport={"eval_latency_min": 1.0, "eval_latency_max": 500.0}))
    rec_jitter = Recording(jitter)
    b = jitter.run()
    assert rec_fixed.order != rec_jitter.order
    assert sorted(rec_fixed.order) == sorted(rec_jitter.order)
    assert snapshot(a.population) == snapshot(b.population)


def test_es_mode_runs():
    res = run_evolution(evo_cfg(run={"mode": "es", "generations": 2}, ec={"sigma": 0.05}))
    assert res.selections == 2 and len(res.population) == 4


class LrFitness(Evaluator):
    """Fitness grows with lr; frames are counted but nothing is trained."""

    def describe(self):
        return EvaluatorSpec("hyper", 1, ("max",), ranges={"lr": (1e-5, 0.1)})

    def initialize(self, rng, id=None):
        return Candidate(HyperParams({"lr": float(rng.uniform(1e-4, 0.1))}, {"lr": (1e-5, 0.1)}),
                         id=next_id() if id is None else id)

    def evaluate(self, candidate, rng=None):
        return ObjectiveVector.maximize(candidate.coding.values["lr"])

    def run(self, candidate, rng=None):
        return Outcome(self.evaluate(candidate), candidate.coding,
                       {"frames": 100.0, "return": candidate.coding.values["lr"]})


def pbt_cfg(n=10, g=3):
    return evo_cfg(run={"mode": "pbt_ppo", "generations": g}, ec={"population": n},
                   evaluator={"name": "ppo", "budget": 8192, "search": {"lr": [1e-5, 0.1]}})


def test_pbt_replaces_exactly_bottom_quintile():
    runner = EvolutionRun(pbt_cfg(), LrFitness())
    prev = {}
    orig_dispatch = runner._dispatch

    def dispatch(g, groups):
        if g > 0:
            ranked = sorted(runner.population.members,
                            key=lambda c: (-c.objectives.values[0], c.id))
            prev[g] = sorted(c.id for c in ranked[-2:])
        return orig_dispatch(g, groups)
    runner._dispatch = dispatch
    res = runner.run()
    assert res.exploited == [prev[g] for g in (1, 2, 3)]
    assert all(len(e) == 2 for e in res.exploited)
    assert len({c.id for c in res.population.members}) == 10
    for c in res.population.members:
        assert 1e-5 <= c.coding.values["lr"] <= 0.1


class Flaky(LrFitness):
    def run(self, candidate, rng=None):
        from lmrk.evaluator import EvaluationFailed
        if candidate.id % 3 == 0:
            raise EvaluationFailed(candidate.id, "boom")
        return super().run(candidate, rng)


def test_failed_evaluations_retry_then_worst():
    res = run_evolution(pbt_cfg(n=6, g=1), Flaky())
    failed = [c for c in res.population.members if c.info.get("failed")]
    assert failed and all(c.id % 3 == 0 for c in failed)
    assert all(c.objectives.values == (-1e12,) for c in failed)
    assert res.failures == 2 * len(failed) * 2  # both generations, two attempts each


def rl_cfg(**sections) -> RunConfig:
    base = {"run": {"mode": "ppo", "frames": 8 * 1024, "seed": 1},
            "rl": {"batch_size": 1024, "trunk": [16, 16], "critic": [], "optimizer": "adam",
                   "learning_rate": 1e-3, "reward_scale": 0.01},
            "transport": {"actors": 4, "fragment": 64, "actors_per_machine": 2,
                          "learner_step_cost": 20.0},
            "metrics": {"interval": 500.0}}
    for k, v in sections.items():
        base.setdefault(k, {}).update(v)
    return from_dict(base, env={})


@pytest.mark.parametrize("reuse,expected", [(1, 1.0), (2, 1.5)])
def test_sync_reference_staleness(reuse, expected):
    res = run_rl(rl_cfg(run={"schedule": "sync"}, rl={"batch_reuse": reuse}))
    assert abs(res.metrics.staleness_mean - expected) <= 1e-9


def test_budget_arithmetic_and_fps_accounting():
    cfg = rl_cfg(run={"frames": 10 * 1024}, rl={"batch_reuse": 3})
    res = run_rl(cfg)
    assert res.metrics.gradient_steps == 30
    assert res.packet.version == 30
    assert res.metrics.frames == 10 * 1024
    assert sum(r.weight for r in res.metrics.staleness) == 3 * 10 * 1024
    rows = res.metrics.rows
    assert [r.frames for r in rows] == sorted(r.frames for r in rows)
    assert rows[-1].frames == 10 * 1024
    assert res.metrics.fps == pytest.approx(res.metrics.frames / res.metrics.elapsed_s)


def test_staleness_grows_with_actors():
    def stale(a):
        cfg = rl_cfg(run={"frames": 6 * 1024}, transport={"actors": a, "actors_per_machine": 1},
                     broadcast={"layout": "flat"})
        return run_rl(cfg).metrics.staleness_mean
    assert stale(32) > stale(4)


def test_async_faster_than_sync():
    a = run_rl(rl_cfg(transport={"actors": 16})).metrics.fps
    s = run_rl(rl_cfg(run={"schedule": "sync"}, transport={"actors": 16})).metrics.fps
    assert a > s


def test_metrics_csv_is_deterministic(tmp_path):
    cfg = rl_cfg()
    run(cfg, str(tmp_path / "a"))
    run(cfg, str(tmp_path / "b"))
    a = (tmp_path / "a" / "metrics.csv").read_bytes()
    assert a == (tmp_path / "b" / "metrics.csv").read_bytes()
    lines = a.decode().splitlines()
    assert lines[0] == CSV_HEADER and len(lines) > 2
    assert (tmp_path / "a" / "policy.lmrk").read_bytes()[:4] == b"LMRK"


def test_evolution_outputs(tmp_path):
    out = run(evo_cfg(run={"generations": 2}), str(tmp_path))
    doc = json.loads((tmp_path / "population.json").read_text())
    assert doc["schema"] == "lmrk.population/1"
    assert len(doc["members"]) == 4 and doc["generation"] == 2
    lines = (tmp_path / "metrics.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER and len(lines) == 4
    assert ";" in lines[1].split(",")[6]


def test_bench_broadcast_mode(tmp_path):
    cfg = from_dict({"run": {"mode": "bench_broadcast"}, "broadcast": {"bench_n": [100]}}, env={})
    run(cfg, str(tmp_path))
    text = (tmp_path / "broadcast.csv").read_text().splitlines()
    assert text[0] == "n,layout,out_degree,max_delay,root_traffic"
    rows = {r.split(",")[1]: r.split(",") for r in text[1:]}
    assert float(rows["tree"][3]) == 19 and float(rows["flat"][3]) == 100


@pytest.mark.parametrize("layout,schedule", [("tree", "async"), ("flat", "sync")])
def test_socket_backend_smoke(layout, schedule):
    cfg = rl_cfg(run={"frames": 2048, "schedule": schedule},
                 rl={"batch_size": 512, "trunk": [8], "critic": []},
                 transport={"kind": "socket", "actors": 5}, broadcast={"layout": layout})
    res = run_rl(cfg)
    assert res.metrics.frames == 2048 and res.packet.version == 4
    if schedule == "sync":
        assert res.metrics.staleness_mean == 1.0


def test_fixed_baseline_matches_one_member_budget():
    cfg = evo_cfg(run={"mode": "pbt_ppo", "generations": 1}, ec={"population": 4},
                  env={"name": "pendulum"},
                  rl={"batch_size": 1024, "trunk": [8], "critic": [], "optimizer": "adam"},
                  evaluator={"name": "ppo", "budget": 1024, "n_envs": 2, "search": {"lr": [1e-4, 0.1]}})
    returns = fixed_baseline(cfg, runs=2)
    assert len(returns) == 2 and all(np.isfinite(returns))
    assert fixed_baseline(cfg, runs=2) == returns
    with pytest.raises(ValueError):
        fixed_baseline(evo_cfg())
