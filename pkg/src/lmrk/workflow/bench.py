"""Broadcast benchmark: completion time and root traffic per layout."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from ..broadcast import broadcast_policy, make_topology
from ..core import Layer, PolicyPacket, PolicyParams
from ..transport.sim import CostModel, Endpoint, SimNetwork

BENCH_HEADER = "n,layout,out_degree,max_delay,root_traffic"


@dataclass(frozen=True)
class BenchRow:
    n: int
    layout: str
    out_degree: int
    max_delay: float
    root_traffic: int

    def csv(self) -> str:
        return f"{self.n},{self.layout},{self.out_degree},{format(self.max_delay, '.10g')},{self.root_traffic}"


def bench_broadcast(ns: Iterable[int], layouts: Iterable[str] = ("flat", "tree"),
                    cost: CostModel | None = None) -> list[BenchRow]:
    """One broadcast per (n, layout), every node on its own machine."""
    cost = cost or CostModel.uniform(1.0)
    packet = PolicyPacket(1, PolicyParams((Layer([[0.0]], [0.0]),)))
    rows = []
    for n in ns:
        for layout in layouts:
            net = SimNetwork(cost)
            root = net.register(Endpoint(0, 0))
            nodes = [net.register(Endpoint(i, i)) for i in range(1, n + 1)]
            topo = make_topology(layout, nodes, root)
            report = broadcast_policy(packet, topo, net)
            net.run()
            if not report.complete:
                raise RuntimeError(f"broadcast to {n} nodes did not complete")
            rows.append(BenchRow(n, layout, topo.out_degree, report.max_delay, report.traffic_at_root))
    return rows


def bench_csv(rows: Iterable[BenchRow]) -> str:
    return "\n".join([BENCH_HEADER] + [r.csv() for r in rows]) + "\n"
