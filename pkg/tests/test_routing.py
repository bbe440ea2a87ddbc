import itertools
import random

import pytest

from meshbal.errors import DisconnectedError, StaleRoute, UnknownReceiver
from meshbal.routing import (
    BackboneGraph,
    RouteTable,
    build_graph,
    path_cost,
    route_cost,
    shortest_paths,
)
from meshbal.scenario import NodeKind, NodeSpec, Scenario


def triangle():
    return BackboneGraph.from_edges("ABC", [("A", "B", 1.0), ("B", "C", 1.0), ("A", "C", 3.0)])


def test_triangle_route_goes_via_middle():
    e = shortest_paths(triangle(), "C")
    assert e["A"].cost_us == 2.0 and e["A"].path == ("A", "B", "C") and e["A"].next_hop == "B"
    assert e["C"].cost_us == 0.0 and e["C"].path == ()


def test_build_graph_two_routers():
    s = Scenario(nodes=(NodeSpec("r1", NodeKind.MESH_ROUTER, (0, 0)),
                        NodeSpec("r2", NodeKind.MESH_ROUTER, (0, 0))),
                 backbone_links=(("r1", "r2", 12.0),))
    g = build_graph(s)
    assert g.edges == [("r1", "r2", pytest.approx(335 + 364 + 8224 / 12, rel=1e-12))]


def test_disconnected_graph_rejected():
    with pytest.raises(DisconnectedError):
        BackboneGraph.from_edges("ABC", [("A", "B", 1.0)])


def test_route_table_lookup_and_staleness():
    t = RouteTable.compute(triangle(), now_us=0.0, refresh_window_us=1000.0)
    assert route_cost(t, "A", "C", 500.0) == 2.0
    assert route_cost(t, "B", "B", 500.0) == 0.0
    with pytest.raises(StaleRoute):
        route_cost(t, "A", "C", 1001.0)
    with pytest.raises(UnknownReceiver):
        shortest_paths(triangle(), "Z")


def random_connected_graph(rng, n):
    verts = [f"v{i}" for i in range(n)]
    edges = {}
    for i in range(1, n):  # random spanning tree first
        j = rng.randrange(i)
        edges[(verts[j], verts[i])] = rng.choice([1.0, 2.0, 3.0, rng.uniform(0.5, 5.0)])
    for a, b in itertools.combinations(verts, 2):
        if (a, b) not in edges and rng.random() < 0.35:
            edges[(a, b)] = rng.choice([1.0, 2.0, 3.0, rng.uniform(0.5, 5.0)])
    return BackboneGraph.from_edges(verts, [(a, b, c) for (a, b), c in edges.items()])


def all_simple_paths(g, src, dst):
    out = []

    def walk(path):
        u = path[-1]
        if u == dst:
            out.append(tuple(path))
            return
        for v in g.adjacency[u]:
            if v not in path:
                walk(path + [v])

    walk([src])
    return out


def brute_force(g, src, dst):
    if src == dst:
        return 0.0, ()
    return min((path_cost(g, p), p) for p in all_simple_paths(g, src, dst))


def test_matches_exhaustive_enumeration():
    rng = random.Random(20240)
    for _ in range(150):
        g = random_connected_graph(rng, rng.randint(1, 7))
        rcv = rng.choice(g.vertices)
        got = shortest_paths(g, rcv)
        for v in g.vertices:
            cost, path = brute_force(g, v, rcv)
            assert got[v].cost_us == pytest.approx(cost, rel=1e-12, abs=1e-12)
            assert got[v].path == path
            assert got[v].cost_us == path_cost(g, got[v].path)
