"""The asynchronous evolution loop.

Each generation: mating, then parent pairs are pushed to ``E`` evaluation
contexts on the simulated network; each context varies and evaluates its
pair and streams the offspring back to the collector as they finish.  Only
when the collector holds the whole generation does selection run, so
completion order never affects the outcome.
"""
from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from ..config import RunConfig
from ..core import Candidate, HyperParams, PolicyPacket, RealVector, make_rng, serialize_packet
from ..ec import (
    Population,
    binary_tournament_mating,
    es_variation,
    nsga2_survival,
    pbt_exploit,
    pbt_explore,
    polynomial_mutation,
    rank_and_crowding,
    sbx_crossover,
)
from ..evaluator import (
    Dtlz2,
    EmogiConfig,
    EvaluationFailed,
    Evaluator,
    RlTrainingEvaluator,
    Zdt1,
)
from ..transport.sim import CostModel, Delivery, Endpoint, PushPullChannel, SimNetwork
from .collector import Collector
from .metrics import MetricsRow, RunMetrics, objective_stats, population_json


@dataclass
class EvolutionResult:
    population: Population
    metrics: RunMetrics
    evaluations: int = 0  # offspring evaluations, generation 0 excluded
    initial_evaluations: int = 0
    selections: int = 0
    failures: int = 0
    # ids of members that were replaced by a PBT exploit, per generation
    exploited: list[list[int]] = field(default_factory=list)

    def front(self) -> list[Candidate]:
        """The non-dominated members of the final population."""
        ranks, _ = rank_and_crowding(self.population.members)
        return [m for m, r in zip(self.population.members, ranks) if r == 0]


def make_evaluator(cfg: RunConfig) -> Evaluator:
    e = cfg.evaluator
    if e.name == "zdt1":
        return Zdt1(e.n or 30)
    if e.name == "dtlz2":
        return Dtlz2(e.n or 12, e.m)
    emogi = None
    if cfg.run.mode == "emogi":
        emogi = EmogiConfig(e.emogi.w1, e.emogi.w2, e.emogi.T, e.emogi.laziness_form)
    trunk, critic = cfg.rl.network()
    return RlTrainingEvaluator(
        cfg.env.name, cfg.rl.ppo(), e.budget, ranges=dict(e.search), defaults=dict(e.defaults),
        env_config=cfg.env_config(), n_envs=e.n_envs, fragment=cfg.transport.fragment,
        trunk=trunk, critic=critic, window=e.window, emogi=emogi, point_weight=e.emogi.point_weight)


# HyperParams travel through SBX and polynomial mutation as a vector over their ranges

def hyper_to_real(hp: HyperParams) -> RealVector:
    keys = sorted(hp.values)
    return RealVector(np.array([hp.values[k] for k in keys]),
                      np.array([hp.ranges[k][0] for k in keys]),
                      np.array([hp.ranges[k][1] for k in keys]))


def real_to_hyper(rv: RealVector, template: HyperParams) -> HyperParams:
    keys = sorted(template.values)
    return template.with_values(**{k: float(v) for k, v in zip(keys, rv.values)})


@dataclass
class _Job:
    generation: int
    index: int
    parents: tuple[Candidate, ...]
    ids: tuple[int, ...]


class EvolutionRun:
    def __init__(self, cfg: RunConfig, evaluator: Evaluator | None = None):
        self.cfg = cfg
        self.mode = cfg.run.mode
        if self.mode not in ("nsga2", "es", "pbt_ppo", "emogi"):
            raise ValueError(f"mode {self.mode!r} is not an evolution mode")
        self.evaluator = evaluator or make_evaluator(cfg)
        self.spec = self.evaluator.describe()
        self.n = cfg.ec.population
        self.seed = cfg.run.seed
        self._next_id = 1
        t = cfg.transport
        self.net = SimNetwork(CostModel(t.inter_machine_send_cost, t.intra_machine_send_cost,
                                        t.per_byte_cost))
        self.orch = self.net.register(Endpoint(0, 0))
        self.contexts = [self.net.register(Endpoint(i + 1, i + 1)) for i in range(t.eval_contexts)]
        self.channel = PushPullChannel(self.net, self.orch, self.contexts)
        self._inbox = {ep.node_id: deque() for ep in self.contexts}
        self._busy = {ep.node_id: False for ep in self.contexts}
        for ep in self.contexts:
            self.net.add_handler(ep, self._on_job)
        self.collector = Collector()
        self.metrics = RunMetrics()
        self.result = EvolutionResult(Population(()), self.metrics)
        self._frames = 0
        self._last = (0.0, 0)

    def _ids(self, k: int) -> tuple[int, ...]:
        out = tuple(range(self._next_id, self._next_id + k))
        self._next_id += k
        return out

    # -- evaluation contexts --------------------------------------------------

    def _on_job(self, d: Delivery) -> None:
        if not isinstance(d.payload, _Job):
            return
        ctx = d.dst.node_id
        self._inbox[ctx].append(d.payload)
        if not self._busy[ctx]:
            self._work(d.dst)

    def _work(self, ep: Endpoint) -> None:
        inbox = self._inbox[ep.node_id]
        if not inbox:
            self._busy[ep.node_id] = False
            return
        self._busy[ep.node_id] = True
        job = inbox.popleft()
        rng = make_rng(self.seed, "job", job.generation, job.index)
        t = self.cfg.transport
        at = self.net.clock
        for child in self._vary(job, rng):
            child = self._evaluate(child, job, rng)
            frames = float(child.info.get("frames", 0.0))
            at += rng.uniform(t.eval_latency_min, t.eval_latency_max)
            at += frames * t.actor_frame_cost / max(self.cfg.evaluator.n_envs, 1)
            self.net.schedule(at, lambda c=child: self.net.send(
                ep, self.orch, c, on_delivered=lambda d, g=job.generation: self._collect(g, d.payload)))
        self.net.schedule(at, lambda: self._work(ep))

    def _vary(self, job: _Job, rng: np.random.Generator) -> list[Candidate]:
        if job.generation == 0:
            return [Candidate(p.coding, id=p.id) for p in job.parents]
        ec = self.cfg.ec
        pm = None if ec.p_m < 0 else ec.p_m
        if self.mode == "pbt_ppo":
            out = []
            for member, cid in zip(job.parents, job.ids):
                cand, copied = pbt_exploit(self.population.members, member, rng, ec.pbt_quantile)
                if copied:
                    cand = Candidate(pbt_explore(cand.coding, rng, ec.pbt_factors), id=cid,
                                     info={"exploited": 1.0})
                    self._exploited.append(member.id)
                else:
                    cand = Candidate(cand.coding, id=cid)
                out.append(cand)
            return out
        if self.mode == "es":
            return [es_variation(p, ec.sigma, rng, id=cid) for p, cid in zip(job.parents, job.ids)]
        p1, p2 = job.parents
        hyper = isinstance(p1.coding, HyperParams)
        x1, x2 = (hyper_to_real(p.coding) for p in (p1, p2)) if hyper else (p1.coding, p2.coding)
        c1, c2 = sbx_crossover(x1, x2, rng, ec.eta_c, ec.p_c)
        c1 = polynomial_mutation(c1, rng, ec.eta_m, pm)
        c2 = polynomial_mutation(c2, rng, ec.eta_m, pm)
        if hyper:
            # each child continues training from the weights of the parent in its slot
            c1, c2 = real_to_hyper(c1, p1.coding), real_to_hyper(c2, p2.coding)
        return [Candidate(c1, id=job.ids[0]), Candidate(c2, id=job.ids[1])]

    def _evaluate(self, child: Candidate, job: _Job, rng: np.random.Generator) -> Candidate:
        for attempt in range(2):
            try:
                out = self.evaluator.run(child, rng)
            except EvaluationFailed as exc:
                last = exc
                self.result.failures += 1
                continue
            if job.generation == 0:
                self.result.initial_evaluations += 1
            else:
                self.result.evaluations += 1
            return Candidate(out.coding, out.objectives, child.id, {**child.info, **out.info})
        return Candidate(child.coding, self.evaluator.worst(), child.id,
                         {**child.info, "failed": 1.0, "error": str(last.reason)})

    def _collect(self, generation: int, cand: Candidate) -> None:
        self.collector.submit(generation, cand)

    # -- generations ----------------------------------------------------------

    def _dispatch(self, generation: int, groups: list[tuple[Candidate, ...]]) -> list[Candidate]:
        """Push every group as one job; block (in simulated time) until all offspring arrive."""
        self.collector.open(generation, sum(len(g) for g in groups))
        for i, parents in enumerate(groups):
            keep = generation == 0 or self.mode == "pbt_ppo"
            ids = tuple(p.id for p in parents) if keep else self._ids(len(parents))
            self.channel.push(_Job(generation, i, parents, ids))
        self.net.run(stop=lambda: self.collector.received >= self.collector.expected)
        done = self.collector.poll(generation)
        if done is None:
            raise RuntimeError(f"generation {generation} stalled")
        return done

    def _initial_population(self) -> Population:
        rng = make_rng(self.seed, "init")
        members = [self.evaluator.initialize(rng, id=i) for i in self._ids(self.n)]
        # generation 0 is evaluated through the same contexts, one member per job
        self.population = Population(())
        self._exploited = []
        members = self._dispatch(0, [(m,) for m in members])
        self._count_frames(members)
        pop = Population(tuple(members), 0)
        self.metrics.rows.append(self._row(0, pop.members))
        return pop

    def _row(self, generation: int, members) -> MetricsRow:
        now = self.net.clock / 1000.0
        frames = self._frames
        t0, f0 = self._last
        self._last = (now, frames)
        fps = (frames - f0) / (now - t0) if now > t0 and frames else None
        scores = [m.info["return"] for m in members if "return" in m.info]
        lo, mean, hi = objective_stats(members)
        return MetricsRow(now, frames, fps, None, float(np.mean(scores)) if scores else None,
                          generation, lo, mean, hi)

    def run(self) -> EvolutionResult:
        pop = self._initial_population()
        for g in range(1, self.cfg.run.generations + 1):
            self.population = pop
            self._exploited = []
            rng = make_rng(self.seed, "mating", g)
            if self.mode == "pbt_ppo":
                ordered = sorted(pop.members, key=lambda c: c.id)
                groups = [tuple(ordered[i:i + 2]) for i in range(0, len(ordered), 2)]
                offspring = self._dispatch(g, groups)
                # truncation: trained members replace their parents in place
                survivors = offspring
                self.result.exploited.append(sorted(self._exploited))
            else:
                ranks, crowd = rank_and_crowding(pop.members)
                groups = binary_tournament_mating(pop.members, rng, ranks, crowd)
                offspring = self._dispatch(g, groups)
                survivors = nsga2_survival(list(pop.members) + offspring, self.n)
                survivors.sort(key=lambda c: c.id)
            self.result.selections += 1
            self._count_frames(offspring)
            pop = Population(tuple(survivors), g)
            self.metrics.rows.append(self._row(g, pop.members))
        self.result.population = pop
        self.metrics.frames = self._frames
        self.metrics.elapsed_s = self.net.clock / 1000.0
        return self.result

    def _count_frames(self, members) -> None:
        self._frames += int(sum(m.info.get("frames", 0.0) for m in members))

    # -- output ---------------------------------------------------------------

    def write(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        self.metrics.write_csv(os.path.join(out_dir, "metrics.csv"))
        pop = self.result.population
        ranks, crowd = rank_and_crowding(pop.members)
        files = {}
        for m in pop.members:
            weights = getattr(m.coding, "weights", None) or getattr(m.coding, "params", None)
            if weights is not None and not isinstance(m.coding, RealVector):
                name = os.path.join("policies", f"{m.id}.lmrk")
                os.makedirs(os.path.join(out_dir, "policies"), exist_ok=True)
                with open(os.path.join(out_dir, name), "wb") as fh:
                    fh.write(serialize_packet(PolicyPacket(pop.generation, weights)))
                files[m.id] = name
        text = population_json(pop.members, mode=self.mode, seed=self.seed, generation=pop.generation,
                               evaluator=self.cfg.evaluator.name, senses=self.spec.senses,
                               ranks=ranks, crowding=crowd, weights_files=files)
        with open(os.path.join(out_dir, "population.json"), "w") as fh:
            fh.write(text)


def run_evolution(cfg: RunConfig, evaluator: Evaluator | None = None) -> EvolutionResult:
    return EvolutionRun(cfg, evaluator).run()


def fixed_baseline(cfg: RunConfig, runs: int | None = None) -> list[float]:
    """Final returns of independent PPO runs at the fixed ``[rl]`` hyperparameters.

    Each run gets the frames one PBT member trains for over the whole
    schedule, ``(generations + 1) * budget``, so ``runs = population``
    matches the PBT run's total frame budget.
    """
    base = make_evaluator(cfg)
    if not isinstance(base, RlTrainingEvaluator):
        raise ValueError("a fixed-hyperparameter baseline needs the ppo evaluator")
    ev = replace(base, ranges={}, defaults={},
                 budget=base.budget * (cfg.run.generations + 1))
    out = []
    for i in range(cfg.ec.population if runs is None else runs):
        cand = Candidate(HyperParams({}, {}), id=i)
        try:
            out.append(ev.run(cand, make_rng(cfg.run.seed, "baseline", i)).info["return"])
        except EvaluationFailed:
            out.append(ev.worst().values[0])
    return out
