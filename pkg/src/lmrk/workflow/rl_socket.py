"""Actor/learner PPO loop over real sockets, one process per actor.

Trajectories flow to the learner's pull server; policy packets flow back
through publishers.  With the tree layout the relay actors run their own
publisher and forward the learner's bytes unchanged to their leaves.  An
empty frame on the policy stream tells every actor to stop.
"""
from __future__ import annotations

import io
import multiprocessing as mp
import threading
import time

import numpy as np

from ..broadcast import make_topology
from ..config import RunConfig, from_dict, to_dict
from ..core import Step, Trajectory, deserialize_packet, make_rng, serialize_packet
from ..mdp import spawn
from ..rl import Actor, Learner, MlpPolicy, NonFiniteLoss, make_batch
from ..rl.actor import arch_for
from ..transport.sim import Endpoint
from ..transport.sockets import Publisher, PullServer, PushClient, Subscriber, TransportFailure
from .metrics import MetricsRow, RunMetrics
from .rl_sim import RlResult, env_seed, split_trajectory

STOP = b""
_READY_TIMEOUT = 60.0


def encode_trajectory(tr: Trajectory, returns: list[float]) -> bytes:
    buf = io.BytesIO()
    np.savez(buf,
             meta=np.array([tr.agent_id, tr.policy_version], dtype=np.int64),
             bootstrap=np.array([tr.bootstrap_value]),
             states=np.stack([s.state for s in tr.steps]),
             actions=np.array([s.action for s in tr.steps]),
             log_probs=np.array([s.log_prob for s in tr.steps]),
             values=np.array([s.value for s in tr.steps]),
             rewards=np.stack([np.atleast_1d(s.reward) for s in tr.steps]),
             dones=np.array([s.done for s in tr.steps]),
             returns=np.array(returns, dtype=float))
    return buf.getvalue()


def decode_trajectory(body: bytes) -> tuple[Trajectory, list[float]]:
    z = np.load(io.BytesIO(body), allow_pickle=False)
    agent, version = (int(v) for v in z["meta"])
    actions = z["actions"]
    steps = tuple(
        Step(z["states"][k], actions[k] if actions.ndim > 1 else actions[k].item(),
             float(z["log_probs"][k]), float(z["values"][k]), z["rewards"][k], bool(z["dones"][k]))
        for k in range(len(actions)))
    return Trajectory(agent, version, steps, float(z["bootstrap"][0])), z["returns"].tolist()


def _actor_main(cfg_dict: dict, i: int, parent: str, collector: str, n_leaves: int,
                control) -> None:
    cfg = from_dict(cfg_dict, env={})
    env, ctrls = spawn(cfg.env.name, cfg.env_config(), seed=env_seed(cfg, i))
    actor = Actor(env, ctrls, make_rng(cfg.run.seed, "actor", i), agent_id=i)
    trunk, critic = cfg.rl.network()
    arch = arch_for(env, trunk, critic)
    ppo = cfg.rl.ppo()
    share = ppo.batch_size // cfg.transport.actors + (i < ppo.batch_size % cfg.transport.actors)

    relay = Publisher("127.0.0.1:0") if n_leaves else None
    if relay is not None:
        control.put(("relay", i, relay.address))
    sub = Subscriber(parent)
    push = PushClient(collector)
    latest: list[bytes | None] = [None]
    cond = threading.Condition()
    stopped = threading.Event()

    def reader():
        forwarded = False
        try:
            while True:
                body = sub.recv()
                if relay is not None:
                    if not forwarded:
                        relay.wait_for_peers(n_leaves, _READY_TIMEOUT)
                        forwarded = True
                    relay.publish(body if body is not None else STOP)
                if not body:
                    break
                with cond:
                    latest[0] = body
                    cond.notify_all()
        except (OSError, TransportFailure, TimeoutError):
            pass
        stopped.set()
        with cond:
            cond.notify_all()

    threading.Thread(target=reader, daemon=True).start()
    control.put(("ready", i, None))
    version = -1
    quota = 0
    try:
        while not stopped.is_set():
            with cond:
                # sync mode: once this round's share is produced, wait for a newer policy
                cond.wait_for(lambda: stopped.is_set() or latest[0] is not None and (
                    quota > 0 or deserialize_packet(latest[0]).version > version))
                if stopped.is_set():
                    break
                body = latest[0]
            packet = deserialize_packet(body)
            if packet.version > version:
                actor.load_packet(packet, arch)
                version = packet.version
                if cfg.run.schedule == "sync":
                    quota = share
            n = cfg.transport.fragment
            if cfg.run.schedule == "sync":
                n = min(n, quota)
            before = len(actor.episodes)
            tr = actor.rollout(n)
            if cfg.run.schedule == "sync":
                quota -= len(tr)
            else:
                quota = 1  # async actors never wait
            push.push(encode_trajectory(tr, [e.ret for e in actor.episodes[before:]]))
    except (OSError, TransportFailure):
        pass
    finally:
        push.close()
        sub.close()
        if relay is not None:
            relay.close()


def run_rl_socket(cfg: RunConfig) -> RlResult:
    t = cfg.transport
    ppo = cfg.rl.ppo()
    if cfg.run.frames < ppo.batch_size:
        raise ValueError(f"frame budget {cfg.run.frames} is below one batch ({ppo.batch_size})")
    env, _ = spawn(cfg.env.name, cfg.env_config(), seed=0)
    trunk, critic = cfg.rl.network()
    arch = arch_for(env, trunk, critic)
    learner = Learner(MlpPolicy.init(arch, make_rng(cfg.run.seed, "init")), ppo,
                      rng=make_rng(cfg.run.seed, "minibatch"))

    root = Endpoint(0, 0)
    eps = [Endpoint(i + 1, 1 + i // t.actors_per_machine) for i in range(t.actors)]
    topo = make_topology(cfg.broadcast.layout, eps, root)
    ctx = mp.get_context("spawn")
    control = ctx.Queue()
    cfg_dict = to_dict(cfg)
    pull = PullServer(t.address)
    pub = Publisher("127.0.0.1:0")
    procs = []

    def start(ep: Endpoint, parent: str, n_leaves: int):
        p = ctx.Process(target=_actor_main, daemon=True,
                        args=(cfg_dict, ep.node_id - 1, parent, pull.address, n_leaves, control))
        p.start()
        procs.append(p)

    metrics = RunMetrics()
    try:
        relay_addr = {}
        for ep in topo.root_children:
            start(ep, pub.address, len(topo.leaves_by_relay.get(ep, ())))
        relays = [ep for ep in topo.relays if topo.leaves_by_relay.get(ep)]
        ready = 0
        while ready < len(topo.root_children) or len(relay_addr) < len(relays):
            kind, i, addr = control.get(timeout=_READY_TIMEOUT)
            if kind == "relay":
                relay_addr[i] = addr
            else:
                ready += 1
        for ep in relays:
            for leaf in topo.leaves_by_relay[ep]:
                start(leaf, relay_addr[ep.node_id - 1], 0)
        while ready < t.actors:
            kind, _, _ = control.get(timeout=_READY_TIMEOUT)
            ready += kind == "ready"
        pub.wait_for_peers(len(topo.root_children), _READY_TIMEOUT)

        t0 = time.monotonic()
        pub.publish(serialize_packet(learner.packet()))
        queue: list[Trajectory] = []
        queued = consumed = 0
        returns: list[float] = []
        last = (0.0, 0, 0)
        next_row = cfg.metrics.wall_interval

        def row(now: float) -> MetricsRow:
            nonlocal last, returns
            tp, fp, sp = last
            recs = metrics.staleness[sp:]
            w = sum(r.weight for r in recs)
            fps = (consumed - fp) / (now - tp) if now > tp else None
            out = MetricsRow(now, consumed, fps,
                             sum(r.staleness * r.weight for r in recs) / w if w else None,
                             float(np.mean(returns)) if returns else None)
            last, returns = (now, consumed, len(metrics.staleness)), []
            return out

        while consumed + ppo.batch_size <= cfg.run.frames:
            try:
                body = pull.recv(timeout=_READY_TIMEOUT)
            except TimeoutError:
                raise TransportFailure("actors stopped sending trajectories") from None
            tr, rets = decode_trajectory(body)
            returns.extend(rets)
            queue.append(tr)
            queued += len(tr)
            while queued >= ppo.batch_size and consumed + ppo.batch_size <= cfg.run.frames:
                pieces, need = [], ppo.batch_size
                while need:
                    tr = queue.pop(0)
                    if len(tr) > need:
                        tr, rest = split_trajectory(tr, need, tr.steps[need].value)
                        queue.insert(0, rest)
                    pieces.append(tr)
                    need -= len(tr)
                queued -= ppo.batch_size
                try:
                    res = learner.update(make_batch(pieces, ppo), time.monotonic() - t0)
                except NonFiniteLoss as exc:
                    metrics.aborted = str(exc)
                    break
                metrics.staleness.extend(res.staleness)
                consumed += ppo.batch_size
                if consumed + ppo.batch_size <= cfg.run.frames:
                    pub.publish(serialize_packet(res.packet))
            if metrics.aborted:
                break
            now = time.monotonic() - t0
            if now >= next_row:
                metrics.rows.append(row(now))
                next_row = now + cfg.metrics.wall_interval
        now = time.monotonic() - t0
        metrics.rows.append(row(now))
        metrics.frames, metrics.elapsed_s = consumed, now
        metrics.gradient_steps = learner.gradient_steps
    finally:
        try:
            pub.publish(STOP)
        except TransportFailure:
            pass
        for p in procs:
            p.join(timeout=10)
            if p.is_alive():
                p.terminate()
        pub.close()
        pull.close()
    return RlResult(learner.packet(metrics.elapsed_s), metrics)
