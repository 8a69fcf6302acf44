"""Compare flat and two-layer tree broadcast as the number of actors grows.

The learner sends every new policy either to each actor directly (flat) or
to about sqrt(n) relays that forward it to their own leaves (tree).
"""
from __future__ import annotations

from lmrk.transport.sim import CostModel
from lmrk.workflow import bench_broadcast

if __name__ == "__main__":
    rows = bench_broadcast([4, 9, 25, 100, 400, 1600], ["flat", "tree"], CostModel(1.0, 1.0))
    print(f"{'n':>6} {'layout':>6} {'max delay':>10} {'root sends':>10}")
    for r in rows:
        print(f"{r.n:>6} {r.layout:>6} {r.max_delay:>10.0f} {r.root_traffic:>10.0f}")
