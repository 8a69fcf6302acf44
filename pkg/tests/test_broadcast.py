from __future__ import annotations

import math

import pytest
from hypothesis import given, settings, strategies as st

from lmrk.broadcast import (
    EmptyNodeSet, broadcast_policy, build_tree, ceil_sqrt, expected_max_delay, flat_topology,
    make_topology, mean_staleness, record_staleness,
)
from lmrk.core import PolicyPacket, PolicyParams, VersionRegression
from lmrk.transport import CostModel, Endpoint, SimNetwork


def setup(n, c=1.0):
    net = SimNetwork(CostModel.uniform(c))
    root = net.register(Endpoint(0, 0))
    nodes = [net.register(Endpoint(i + 1, i + 1)) for i in range(n)]
    return net, root, nodes


def bcast(layout, n, c=1.0):
    net, root, nodes = setup(n, c)
    topo = make_topology(layout, nodes, root)
    rep = broadcast_policy(PolicyPacket(1, PolicyParams()), topo, net)
    net.run()
    assert rep.complete
    return topo, rep


def test_single_node_tree():
    net, root, nodes = setup(1)
    topo = build_tree(nodes, root)
    assert topo.relays == () and topo.root_children == tuple(nodes)
    assert topo.parent_of(nodes[0]) == root
    _, rep = bcast("tree", 1)
    assert rep.max_delay == 1.0 == expected_max_delay(1, 1)


def test_nine_node_tree():
    _, root, nodes = setup(9)
    topo = build_tree(nodes, root)
    assert topo.out_degree == 3 and len(topo.relays) == 3
    assert all(len(topo.leaves_by_relay[r]) == 2 for r in topo.relays)
    assert topo.depth == 3


def test_four_node_tree():
    _, root, nodes = setup(4)
    topo = build_tree(nodes, root)
    assert topo.out_degree == 2
    assert [len(topo.leaves_by_relay[r]) for r in topo.relays] == [1, 1]


def test_empty_and_bad_inputs():
    net, root, _ = setup(0)
    with pytest.raises(EmptyNodeSet):
        build_tree([], root)
    with pytest.raises(EmptyNodeSet):
        flat_topology([], root)
    with pytest.raises(ValueError):
        build_tree([root], root)


def test_nine_node_delivery_times():
    topo, rep = bcast("tree", 9)
    relay_times = sorted(rep.delivery_time[r.node_id] for r in topo.relays)
    assert relay_times == [1.0, 2.0, 3.0]
    for r in topo.relays:
        t = rep.delivery_time[r.node_id]
        assert max(rep.delivery_time[l.node_id] for l in topo.leaves_by_relay[r]) == t + 2
    assert rep.max_delay == 5.0
    assert bcast("flat", 9)[1].max_delay == 9.0


def test_hundred_nodes():
    _, tree = bcast("tree", 100)
    _, flat = bcast("flat", 100)
    assert tree.max_delay == 19.0 and flat.max_delay == 100.0
    assert tree.traffic_at_root == 10 and flat.traffic_at_root == 100
    assert tree.max_delay / flat.max_delay <= 0.25


def test_expected_max_delay_examples():
    assert expected_max_delay(100, 10) == 19
    assert expected_max_delay(9, 3) == 5
    assert expected_max_delay(100, 100) == 100
    assert expected_max_delay(7, 3, 2.0) == 2.0 * (3 + 2)
    with pytest.raises(ValueError):
        expected_max_delay(0, 1)


@pytest.mark.parametrize("n", range(1, 401))
def test_simulation_matches_formula(n):
    topo, rep = bcast("tree", n)
    d = ceil_sqrt(n)
    assert topo.out_degree == d == math.ceil(math.sqrt(n))
    assert rep.max_delay == expected_max_delay(n, d)
    assert rep.traffic_at_root == (d if n > 1 else 1)
    if n >= 4:
        assert rep.max_delay < n


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.integers(1, 8), st.integers(0, 2**32))
def test_tree_covers_every_node_once(n, per_machine, seed):
    net = SimNetwork()
    root = net.register(Endpoint(0, 0))
    nodes = [net.register(Endpoint(i + 1, 1 + i // per_machine)) for i in range(n)]
    topo = build_tree(nodes, root)
    assert sorted(topo.nodes) == sorted(nodes)
    sizes = [len(topo.leaves_by_relay[r]) for r in topo.relays]
    if sizes:
        assert max(sizes) - min(sizes) <= 1
    rep = broadcast_policy(PolicyPacket(2, PolicyParams()), topo, net)
    net.run()
    assert rep.complete


def test_broadcast_does_not_block_caller():
    net, root, nodes = setup(9)
    rep = broadcast_policy(PolicyPacket(1, PolicyParams()), build_tree(nodes, root), net)
    assert net.clock == 0.0 and not rep.complete


def test_relays_forward_identical_bytes():
    net, root, nodes = setup(9)
    seen = {}
    broadcast_policy(PolicyPacket(4, PolicyParams()), build_tree(nodes, root), net,
                     on_receive=lambda ep, frame, t: seen.setdefault(ep.node_id, frame.data))
    net.run()
    assert len(seen) == 9 and len(set(seen.values())) == 1


def test_staleness_examples():
    assert record_staleness(5, 6).staleness == 1
    assert mean_staleness([record_staleness(5, 6), record_staleness(5, 7)]) == 1.5
    assert record_staleness(8, 12).staleness == 4
    assert math.isnan(mean_staleness([]))
    with pytest.raises(VersionRegression):
        record_staleness(3, 2)
