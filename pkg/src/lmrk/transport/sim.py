"""Deterministic discrete-event network with serialized senders.

A node pushes its outgoing messages through one link, one at a time: the
i-th of k back-to-back sends completes at ``i * send_cost`` after the first
one starts.  That single rule is what makes a flat broadcast to n nodes cost
``n`` units while a two-level tree costs about ``2 * sqrt(n)``.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable


class UnknownEndpoint(KeyError):
    pass


@dataclass(frozen=True, order=True)
class Endpoint:
    node_id: int
    machine_id: int = 0


@dataclass(frozen=True)
class CostModel:
    inter_machine_send_cost: float = 1.0
    intra_machine_send_cost: float = 0.05
    per_byte_cost: float = 0.0

    def __post_init__(self):
        if min(self.inter_machine_send_cost, self.intra_machine_send_cost, self.per_byte_cost) < 0:
            raise ValueError("costs must be non-negative")
        if self.intra_machine_send_cost > self.inter_machine_send_cost:
            raise ValueError("intra-machine cost must not exceed inter-machine cost")

    @classmethod
    def uniform(cls, c: float = 1.0) -> "CostModel":
        return cls(c, c, 0.0)

    def send_cost(self, src: Endpoint, dst: Endpoint, nbytes: int = 0) -> float:
        base = (self.intra_machine_send_cost if src.machine_id == dst.machine_id
                else self.inter_machine_send_cost)
        return base + self.per_byte_cost * nbytes


@dataclass(frozen=True)
class Delivery:
    time: float
    seq: int
    src: Endpoint
    dst: Endpoint
    payload: Any
    nbytes: int = 0
    on_delivered: Callable[["Delivery"], None] | None = field(default=None, compare=False, repr=False)


Handler = Callable[[Delivery], None]


class SimNetwork:
    """Event queue shared by message deliveries and local timers.

    Events fire in ``(time, seqno)`` order, where seqno is the global order in
    which they were scheduled; this makes every trace a pure function of the
    driver script.
    """

    def __init__(self, cost: CostModel | None = None):
        self.cost = cost or CostModel()
        self.clock = 0.0
        self._queue: list[tuple[float, int, int, Any]] = []
        self._seq = itertools.count()
        self._free_at: dict[int, float] = {}
        self._endpoints: dict[int, Endpoint] = {}
        self._handlers: dict[int, list[Handler]] = {}
        self.sent_count: dict[int, int] = {}
        self.trace: list[Delivery] | None = None

    # -- registry ---------------------------------------------------------

    def register(self, ep: Endpoint, handler: Handler | None = None) -> Endpoint:
        known = self._endpoints.get(ep.node_id)
        if known is not None and known != ep:
            raise ValueError(f"node {ep.node_id} already registered on machine {known.machine_id}")
        self._endpoints[ep.node_id] = ep
        self._free_at.setdefault(ep.node_id, 0.0)
        self.sent_count.setdefault(ep.node_id, 0)
        if handler is not None:
            self.add_handler(ep, handler)
        return ep

    def add_handler(self, ep: Endpoint, handler: Handler) -> None:
        """Every handler of the destination node sees every delivery to it."""
        self._check(ep)
        self._handlers.setdefault(ep.node_id, []).append(handler)

    def _check(self, ep: Endpoint) -> None:
        if self._endpoints.get(ep.node_id) != ep:
            raise UnknownEndpoint(ep)

    def sender_free_at(self, ep: Endpoint) -> float:
        return self._free_at[ep.node_id]

    # -- scheduling ---------------------------------------------------------

    def send(self, src: Endpoint, dst: Endpoint, payload: Any = None,
             nbytes: int = 0, at: float | None = None,
             on_delivered: Callable[[Delivery], None] | None = None) -> float:
        """Queue a message; return its delivery time.

        The send starts at ``max(at, clock, sender_free_at)`` and the sender
        stays busy until the delivery time.  ``on_delivered`` runs at delivery,
        before the destination's handlers.
        """
        self._check(src)
        self._check(dst)
        start = max(self.clock if at is None else at, self.clock, self._free_at[src.node_id])
        t = start + self.cost.send_cost(src, dst, nbytes)
        self._free_at[src.node_id] = t
        self.sent_count[src.node_id] += 1
        seq = next(self._seq)
        heapq.heappush(self._queue, (t, seq, 0, Delivery(t, seq, src, dst, payload, nbytes, on_delivered)))
        return t

    def schedule(self, t: float, callback: Callable[[], None]) -> None:
        """Run ``callback`` at simulated time ``t`` (a local, network-free event)."""
        if t < self.clock:
            raise ValueError(f"cannot schedule at {t} < clock {self.clock}")
        heapq.heappush(self._queue, (t, next(self._seq), 1, callback))

    def next_time(self) -> float | None:
        return self._queue[0][0] if self._queue else None

    def pending(self) -> int:
        return len(self._queue)

    # -- execution ----------------------------------------------------------

    def _fire(self) -> Delivery | None:
        t, _, kind, item = heapq.heappop(self._queue)
        self.clock = t
        if kind == 1:
            item()
            return None
        if self.trace is not None:
            self.trace.append(item)
        if item.on_delivered is not None:
            item.on_delivered(item)
        for handler in self._handlers.get(item.dst.node_id, ()):
            handler(item)
        return item

    def run_until(self, t: float) -> list[Delivery]:
        """Fire every event due at or before ``t``; return deliveries in order."""
        if t < self.clock:
            raise ValueError(f"run_until({t}) is before clock {self.clock}")
        out = []
        while self._queue and self._queue[0][0] <= t:
            d = self._fire()
            if d is not None:
                out.append(d)
        self.clock = t
        return out

    def run(self, stop: Callable[[], bool] | None = None) -> list[Delivery]:
        """Fire events until the queue drains or ``stop()`` turns true."""
        out = []
        while self._queue and not (stop is not None and stop()):
            d = self._fire()
            if d is not None:
                out.append(d)
        return out


# ---------------------------------------------------------------------------
# Messaging patterns

class PubSubChannel:
    """One publisher fanning every message out to all subscribers."""

    def __init__(self, net: SimNetwork, publisher: Endpoint, subscribers: Iterable[Endpoint] = ()):
        net._check(publisher)
        self.net = net
        self.publisher = publisher
        self.subscribers: list[Endpoint] = []
        for ep in subscribers:
            self.subscribe(ep)

    def subscribe(self, ep: Endpoint) -> None:
        self.net._check(ep)
        self.subscribers.append(ep)

    def publish(self, payload: Any, nbytes: int = 0, at: float | None = None) -> list[float]:
        return [self.net.send(self.publisher, s, payload, nbytes, at) for s in self.subscribers]


class PushPullChannel:
    """Each pushed message goes to exactly one ready puller, round-robin.

    Messages pushed while no puller is ready wait in the channel and are
    released, in push order, as pullers become ready.
    """

    def __init__(self, net: SimNetwork, pusher: Endpoint, pullers: Iterable[Endpoint] = ()):
        net._check(pusher)
        self.net = net
        self.pusher = pusher
        self.pullers: list[Endpoint] = []
        self._ready: dict[int, bool] = {}
        self._next = 0
        self._backlog: list[tuple[Any, int]] = []
        for ep in pullers:
            self.add_puller(ep)

    def add_puller(self, ep: Endpoint, ready: bool = True) -> None:
        self.net._check(ep)
        self.pullers.append(ep)
        self._ready[ep.node_id] = ready

    def set_ready(self, ep: Endpoint, ready: bool = True) -> None:
        self._ready[ep.node_id] = ready
        if ready:
            self._drain()

    def _pick(self) -> Endpoint | None:
        n = len(self.pullers)
        for k in range(n):
            ep = self.pullers[(self._next + k) % n]
            if self._ready[ep.node_id]:
                self._next = (self._next + k + 1) % n
                return ep
        return None

    def _drain(self) -> None:
        while self._backlog:
            ep = self._pick()
            if ep is None:
                return
            payload, nbytes = self._backlog.pop(0)
            self.net.send(self.pusher, ep, payload, nbytes)

    def push(self, payload: Any, nbytes: int = 0, at: float | None = None) -> float | None:
        """Deliver to the next ready puller; ``None`` when the message was queued."""
        if self._backlog:
            self._backlog.append((payload, nbytes))
            self._drain()
            return None
        ep = self._pick()
        if ep is None:
            self._backlog.append((payload, nbytes))
            return None
        return self.net.send(self.pusher, ep, payload, nbytes, at)


def open_channel(net: SimNetwork, pattern: str, frm: Endpoint, to: Iterable[Endpoint]):
    """Open a ``"pubsub"`` or ``"pushpull"`` channel from ``frm`` to ``to``."""
    if pattern == "pubsub":
        return PubSubChannel(net, frm, to)
    if pattern == "pushpull":
        return PushPullChannel(net, frm, to)
    raise ValueError(f"unknown pattern {pattern!r}")
