"""Actor/learner PPO loop on the simulated network.

Actors compute real rollouts but pay for them in simulated time
(``actor_frame_cost`` per frame); the learner pays ``learner_step_cost`` per
pass over a batch.  Trajectories travel to the learner over per-actor push
links and policies come back through the configured broadcast layout, so
latency, throughput and staleness all follow from the cost model.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..broadcast import PolicyFrame, broadcast_policy, make_topology
from ..config import RunConfig
from ..core import PolicyPacket, Trajectory, deserialize_packet, make_rng, serialize_packet
from ..mdp import spawn
from ..rl import Actor, Learner, MlpPolicy, NonFiniteLoss, make_batch
from ..rl.actor import EpisodeStats, arch_for
from ..transport.sim import CostModel, Endpoint, SimNetwork
from .metrics import MetricsRow, RunMetrics

# bytes per step on the wire: state, action, log-prob, value, reward, done
_STEP_OVERHEAD = 4 * 4


@dataclass
class RlResult:
    packet: PolicyPacket
    metrics: RunMetrics
    episodes: list[EpisodeStats] = field(default_factory=list)


def split_trajectory(tr: Trajectory, n: int, next_value: float) -> tuple[Trajectory, Trajectory]:
    """Cut ``tr`` after ``n`` steps; the head bootstraps from the tail's first value."""
    head = Trajectory(tr.agent_id, tr.policy_version, tr.steps[:n],
                      0.0 if tr.steps[n - 1].done else next_value)
    tail = Trajectory(tr.agent_id, tr.policy_version, tr.steps[n:], tr.bootstrap_value)
    return head, tail


def env_seed(cfg: RunConfig, i: int) -> int:
    return (int(make_rng(cfg.run.seed, "env", i).integers(2**63)) + cfg.env.seed) % 2**63


class SimRlRun:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        t = cfg.transport
        self.ppo = cfg.rl.ppo()
        self.sync = cfg.run.schedule == "sync"
        self.budget = cfg.run.frames
        if self.budget < self.ppo.batch_size:
            raise ValueError(f"frame budget {self.budget} is below one batch ({self.ppo.batch_size})")
        self.net = SimNetwork(CostModel(t.inter_machine_send_cost, t.intra_machine_send_cost,
                                        t.per_byte_cost))
        self.learner_ep = self.net.register(Endpoint(0, 0))
        self.actor_eps = [self.net.register(Endpoint(i + 1, 1 + i // t.actors_per_machine))
                          for i in range(t.actors)]
        self.topo = make_topology(cfg.broadcast.layout, self.actor_eps, self.learner_ep)

        self.episodes: list[EpisodeStats] = []
        self.actors: list[Actor] = []
        for i in range(t.actors):
            env, ctrls = spawn(cfg.env.name, cfg.env_config(), seed=env_seed(cfg, i))
            self.actors.append(Actor(env, ctrls, make_rng(cfg.run.seed, "actor", i), agent_id=i,
                                     on_episode=self.episodes.append, clock=lambda: self.net.clock))
        trunk, critic = cfg.rl.network()
        self.arch = arch_for(self.actors[0].env, trunk, critic)
        policy = MlpPolicy.init(self.arch, make_rng(cfg.run.seed, "init"))
        self.learner = Learner(policy, self.ppo, rng=make_rng(cfg.run.seed, "minibatch"))

        self.metrics = RunMetrics()
        self.queue: deque[Trajectory] = deque()
        self.queued = 0
        self.busy = False
        self.done = False
        self.consumed = 0
        self._snapshots: dict[int, MlpPolicy] = {}
        self._latest = [0] * t.actors  # newest version each actor has received
        self._quota = [0] * t.actors  # sync mode: frames still owed this round
        self._last_row = (0.0, 0, 0)  # time, frames, staleness records seen

    # -- policy snapshots ---------------------------------------------------

    def _snapshot(self, version: int, data: bytes) -> MlpPolicy:
        # every receiver gets identical bytes, so decoding once per version is equivalent
        pol = self._snapshots.get(version)
        if pol is None:
            pol = MlpPolicy.from_params(self.arch, deserialize_packet(data).params)
            self._snapshots[version] = pol
            oldest = min(self._latest)
            for v in [v for v in self._snapshots if v < oldest]:
                del self._snapshots[v]
        return pol

    # -- actors -------------------------------------------------------------

    def _start(self, i: int) -> None:
        if self.done:
            return
        a = self.actors[i]
        frag = self.cfg.transport.fragment
        if self.sync:
            if self._quota[i] <= 0:
                return
            frag = min(frag, self._quota[i])
        if a.version < self._latest[i]:
            a.load(self._snapshots[self._latest[i]], self._latest[i])
        tr = a.rollout(frag)
        if self.sync:
            self._quota[i] -= len(tr)
        end = self.net.clock + len(tr) * self.cfg.transport.actor_frame_cost
        self.net.schedule(end, lambda: self._finish(i, tr))

    def _finish(self, i: int, tr: Trajectory) -> None:
        if self.done:
            return
        obs_dim = self.arch.obs_dim
        nbytes = len(tr) * (4 * obs_dim + _STEP_OVERHEAD)
        self.net.send(self.actor_eps[i], self.learner_ep, tr, nbytes,
                      on_delivered=lambda d: self._gather(d.payload))
        self._start(i)

    def _receive(self, node: Endpoint, frame: PolicyFrame, t: float) -> None:
        i = node.node_id - 1
        if frame.version <= self._latest[i]:
            return
        self._latest[i] = frame.version
        self._snapshot(frame.version, frame.data)
        if self.sync:
            self._quota[i] = self._share(i)
            self._start(i)

    def _share(self, i: int) -> int:
        b, a = self.ppo.batch_size, len(self.actors)
        return b // a + (1 if i < b % a else 0)

    # -- learner ------------------------------------------------------------

    def _gather(self, tr: Trajectory) -> None:
        if self.done:
            return
        self.queue.append(tr)
        self.queued += len(tr)
        self._maybe_update()

    def _take_batch(self) -> list[Trajectory]:
        need, pieces = self.ppo.batch_size, []
        while need > 0:
            tr = self.queue.popleft()
            if len(tr) > need:
                nxt = tr.steps[need].value
                tr, rest = split_trajectory(tr, need, nxt)
                self.queue.appendleft(rest)
            pieces.append(tr)
            need -= len(tr)
        self.queued -= self.ppo.batch_size
        return pieces

    def _maybe_update(self) -> None:
        if self.busy or self.done or self.queued < self.ppo.batch_size:
            return
        pieces = self._take_batch()
        self.busy = True
        # compute scales with samples processed, so minibatching does not change the cost of a pass
        end = self.net.clock + self.ppo.batch_reuse * self.cfg.transport.learner_step_cost
        self.net.schedule(end, lambda: self._complete(pieces))

    def _complete(self, pieces: list[Trajectory]) -> None:
        res = self.learner.update(make_batch(pieces, self.ppo), produced_at=self.net.clock)
        self.metrics.staleness.extend(res.staleness)
        self.metrics.gradient_steps = self.learner.gradient_steps
        self.consumed += sum(len(p) for p in pieces)
        self.busy = False
        if self.consumed + self.ppo.batch_size > self.budget:
            self.done = True
            return
        broadcast_policy(res.packet, self.topo, self.net, on_receive=self._receive)
        self._maybe_update()

    # -- metrics ------------------------------------------------------------

    def _row(self) -> MetricsRow:
        t0, f0, s0 = self._last_row
        now = self.net.clock
        recs = self.metrics.staleness[s0:]
        weight = sum(r.weight for r in recs)
        stale = sum(r.staleness * r.weight for r in recs) / weight if weight else None
        eps = [e.ret for e in self.episodes if t0 < e.end_time <= now]
        fps = (self.consumed - f0) / ((now - t0) / 1000.0) if now > t0 else None
        self._last_row = (now, self.consumed, len(self.metrics.staleness))
        return MetricsRow(now / 1000.0, self.consumed, fps, stale,
                          float(np.mean(eps)) if eps else None)

    def _report(self) -> None:
        if self.done:
            return
        self.metrics.rows.append(self._row())
        self.net.schedule(self.net.clock + self.cfg.metrics.interval, self._report)

    # -- driver -------------------------------------------------------------

    def run(self) -> RlResult:
        pol = self._snapshot(0, serialize_packet(self.learner.packet()))
        for i, a in enumerate(self.actors):
            a.load(pol, 0)
            self._quota[i] = self._share(i)
        for i in range(len(self.actors)):
            self.net.schedule(0.0, lambda i=i: self._start(i))
        self.net.schedule(self.cfg.metrics.interval, self._report)
        try:
            self.net.run(stop=lambda: self.done)
        except NonFiniteLoss as exc:
            self.metrics.aborted = str(exc)
        if not self.done and self.metrics.aborted is None:
            raise RuntimeError("simulation stalled before the frame budget was consumed")
        self.metrics.rows.append(self._row())
        self.metrics.frames = self.consumed
        self.metrics.elapsed_s = self.net.clock / 1000.0
        self.episodes.sort(key=lambda e: e.end_time)
        return RlResult(self.learner.packet(self.net.clock), self.metrics, self.episodes)


def run_rl_simulated(cfg: RunConfig) -> RlResult:
    return SimRlRun(cfg).run()
