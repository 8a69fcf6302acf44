"""Machine-grouped broadcast trees, policy broadcast over a network, staleness.

The tree has the learner at the root, ``d = ceil(sqrt(n))`` relay actors in
the second layer and the remaining actors as leaves.  Relays forward the raw
packet bytes they receive; they also consume the policy themselves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .core import PolicyPacket, VersionRegression, serialize_packet
from .transport.sim import Delivery, Endpoint, SimNetwork


class EmptyNodeSet(ValueError):
    pass


def ceil_sqrt(n: int) -> int:
    r = math.isqrt(n)
    return r if r * r == n else r + 1


@dataclass(frozen=True)
class TreeTopology:
    root: Endpoint
    relays: tuple[Endpoint, ...]
    leaves_by_relay: dict[Endpoint, tuple[Endpoint, ...]]
    out_degree: int
    # root children that forward nothing (the n == 1 tree and flat layouts)
    direct: tuple[Endpoint, ...] = ()
    layout: str = "tree"

    @property
    def root_children(self) -> tuple[Endpoint, ...]:
        return self.relays + self.direct

    @property
    def nodes(self) -> list[Endpoint]:
        out = list(self.root_children)
        for r in self.relays:
            out.extend(self.leaves_by_relay[r])
        return out

    @property
    def depth(self) -> int:
        """Number of layers including the root."""
        if any(self.leaves_by_relay.get(r) for r in self.relays):
            return 3
        return 2

    def parent_of(self, ep: Endpoint) -> Endpoint:
        for r, leaves in self.leaves_by_relay.items():
            if ep in leaves:
                return r
        if ep in self.root_children:
            return self.root
        raise KeyError(ep)


def _machine_interleave(nodes: Sequence[Endpoint]) -> list[Endpoint]:
    """First node of every machine, then the second of every machine, ...

    Putting distinct machines first spreads relays over as many hosts as
    possible, so that most leaves can share a host with their relay.
    """
    groups: dict[int, list[Endpoint]] = {}
    for ep in sorted(nodes):
        groups.setdefault(ep.machine_id, []).append(ep)
    machines = sorted(groups)
    out = []
    for k in range(max(len(g) for g in groups.values())):
        out.extend(groups[m][k] for m in machines if k < len(groups[m]))
    return out


def build_tree(nodes: Iterable[Endpoint], root: Endpoint) -> TreeTopology:
    nodes = list(nodes)
    if not nodes:
        raise EmptyNodeSet("cannot build a broadcast tree over zero nodes")
    if root in nodes:
        raise ValueError("root must not be among the nodes")
    if len(set(n.node_id for n in nodes)) != len(nodes):
        raise ValueError("node ids must be unique")
    n = len(nodes)
    d = ceil_sqrt(n)
    if n == 1:
        return TreeTopology(root, (), {}, 1, direct=(nodes[0],))
    ordered = _machine_interleave(nodes)
    relays, rest = ordered[:d], ordered[d:]
    # Leaf quotas differ by at most one; the larger ones go to the relays
    # served last, so the last relay always carries ceil((n - d) / d) leaves.
    base, extra = divmod(len(rest), d)
    quota = [base + (i >= d - extra) for i in range(d)]
    leaves: list[list[Endpoint]] = [[] for _ in range(d)]
    spill = []
    for ep in rest:
        for i, r in enumerate(relays):
            if r.machine_id == ep.machine_id and len(leaves[i]) < quota[i]:
                leaves[i].append(ep)
                break
        else:
            spill.append(ep)
    i = d - 1
    for ep in spill:
        while len(leaves[i]) >= quota[i]:
            i = (i - 1) % d
        leaves[i].append(ep)
        i = (i - 1) % d
    return TreeTopology(root, tuple(relays),
                        {r: tuple(l) for r, l in zip(relays, leaves)}, d)


def flat_topology(nodes: Iterable[Endpoint], root: Endpoint) -> TreeTopology:
    nodes = list(nodes)
    if not nodes:
        raise EmptyNodeSet("cannot broadcast to zero nodes")
    return TreeTopology(root, (), {}, len(nodes), direct=tuple(nodes), layout="flat")


def make_topology(layout: str, nodes: Iterable[Endpoint], root: Endpoint) -> TreeTopology:
    if layout == "tree":
        return build_tree(nodes, root)
    if layout == "flat":
        return flat_topology(nodes, root)
    raise ValueError(f"unknown layout {layout!r}")


@dataclass
class DeliveryReport:
    """Filled in as the network delivers; read it once ``complete``."""

    version: int
    start: float
    expected: int
    delivery_time: dict[int, float] = field(default_factory=dict)
    traffic_at_root: int = 0

    @property
    def complete(self) -> bool:
        return len(self.delivery_time) == self.expected

    @property
    def max_delay(self) -> float:
        if not self.delivery_time:
            return 0.0
        return max(self.delivery_time.values()) - self.start


@dataclass(frozen=True)
class PolicyFrame:
    """Broadcast payload: the packet's wire bytes plus its version for routing."""

    version: int
    data: bytes


def broadcast_policy(packet: PolicyPacket | bytes, topo: TreeTopology, net: SimNetwork,
                     version: int | None = None,
                     on_receive: Callable[[Endpoint, PolicyFrame, float], None] | None = None,
                     ) -> DeliveryReport:
    """Enqueue a broadcast and return immediately.

    The root sends to its children one after another; each relay forwards the
    same bytes to its leaves as soon as it has them.  ``on_receive(node,
    frame, t)`` fires at every node's delivery.
    """
    if isinstance(packet, PolicyPacket):
        data, version = serialize_packet(packet), packet.version
    else:
        data = bytes(packet)
        if version is None:
            raise ValueError("version is required when broadcasting raw bytes")
    frame = PolicyFrame(version, data)
    report = DeliveryReport(version, net.clock, len(topo.nodes))

    def delivered(d: Delivery) -> None:
        report.delivery_time[d.dst.node_id] = d.time
        for leaf in topo.leaves_by_relay.get(d.dst, ()):
            net.send(d.dst, leaf, frame, len(data), on_delivered=delivered)
        if on_receive is not None:
            on_receive(d.dst, frame, d.time)

    for child in topo.root_children:
        net.send(topo.root, child, frame, len(data), on_delivered=delivered)
        report.traffic_at_root += 1
    return report


def expected_max_delay(n: int, out_degree: int, c: float = 1.0) -> float:
    """Closed-form broadcast completion time under uniform per-message cost.

    ``out_degree == n`` is the flat layout.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    d = out_degree
    return (d + -(-(n - d) // d)) * c


# ---------------------------------------------------------------------------
# Staleness

@dataclass(frozen=True)
class StalenessRecord:
    sample_version: int
    update_version: int
    weight: float = 1.0

    @property
    def staleness(self) -> int:
        return self.update_version - self.sample_version


def record_staleness(sample_version: int, update_version: int, weight: float = 1.0) -> StalenessRecord:
    if update_version < sample_version:
        raise VersionRegression(
            f"update version {update_version} is behind sample version {sample_version}")
    return StalenessRecord(sample_version, update_version, weight)


def mean_staleness(records: Iterable[StalenessRecord]) -> float:
    """Weight-averaged staleness; ``nan`` for no records."""
    num = den = 0.0
    for r in records:
        num += r.weight * r.staleness
        den += r.weight
    return num / den if den else math.nan
