"""Minimum-airtime routing over the mesh backbone.

Stands in for airtime-metric AODV: instead of on-demand route discovery the
engine recomputes every shortest path once per refresh window and stations
read the per-receiver route cost from the resulting table.
"""

import heapq
from dataclasses import dataclass, field

from .airtime import StationLinkSample, station_airtime
from .channel import link_quality
from .errors import DisconnectedError, StaleRoute, UnknownReceiver


@dataclass
class BackboneGraph:
    vertices: tuple
    adjacency: dict  # vertex -> {neighbor: cost_us}

    @classmethod
    def from_edges(cls, vertices, edges):
        adjacency = {v: {} for v in vertices}
        for u, v, cost in edges:
            if u not in adjacency or v not in adjacency:
                raise ValueError(f"edge ({u}, {v}) references an unknown vertex")
            if not cost > 0:
                raise ValueError(f"edge ({u}, {v}) has non-positive cost {cost}")
            adjacency[u][v] = cost
            adjacency[v][u] = cost
        graph = cls(tuple(sorted(adjacency)), adjacency)
        graph.check_connected()
        return graph

    @property
    def edges(self):
        out = []
        for u in self.vertices:
            for v, c in sorted(self.adjacency[u].items()):
                if u < v:
                    out.append((u, v, c))
        return out

    def cost(self, u, v):
        return self.adjacency[u][v]

    def check_connected(self):
        if not self.vertices:
            return
        seen = {self.vertices[0]}
        stack = [self.vertices[0]]
        while stack:
            u = stack.pop()
            for v in self.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        missing = sorted(set(self.vertices) - seen)
        if missing:
            raise DisconnectedError(f"backbone vertices unreachable: {', '.join(missing)}")


def build_graph(scenario, channel_params=None, airtime_params=None):
    """One edge per backbone link, weighted by that link's airtime cost."""
    channel_params = channel_params or scenario.channel
    airtime_params = airtime_params or scenario.backbone_airtime
    positions = {n.id: n.position for n in scenario.nodes if n.is_backbone}
    edges = []
    for a, b, rate in scenario.backbone_links:
        q = link_quality(positions[a], positions[b], None, channel_params, backbone=True,
                         nominal_rate=rate)
        edges.append((a, b, station_airtime(airtime_params,
                                            StationLinkSample(q.rate_mbps, q.error_prob))))
    return BackboneGraph.from_edges(positions, edges)


@dataclass(frozen=True)
class RouteEntry:
    next_hop: object  # None when source == receiver
    cost_us: float
    path: tuple  # source ... receiver, empty when source == receiver


def path_cost(graph, path):
    total = 0.0
    for u, v in zip(path, path[1:]):
        total += graph.cost(u, v)
    return total


def shortest_paths(graph, receiver):
    """Minimum-cost route from every vertex to ``receiver``.

    Equal-cost alternatives are broken by the lexicographically smallest
    vertex-id sequence read from the source. Labels are ``(cost, path)``
    pairs compared as tuples, which realises that order directly.
    """
    if receiver not in graph.adjacency:
        raise UnknownReceiver(receiver)
    best = {}
    heap = [(0.0, (receiver,))]
    while heap:
        cost, path = heapq.heappop(heap)
        v = path[0]
        if v in best:
            continue
        best[v] = (cost, path)
        for u, w in graph.adjacency[v].items():
            if u not in best:
                heapq.heappush(heap, (cost + w, (u,) + path))

    entries = {}
    for v, (_, path) in best.items():
        if v == receiver:
            entries[v] = RouteEntry(None, 0.0, ())
        else:
            entries[v] = RouteEntry(path[1], path_cost(graph, path), path)
    return entries


@dataclass
class RouteTable:
    entries: dict = field(default_factory=dict)  # (source, receiver) -> RouteEntry
    epoch_us: float = 0.0
    refresh_window_us: float = float("inf")

    @classmethod
    def compute(cls, graph, now_us=0.0, refresh_window_us=float("inf")):
        table = cls(epoch_us=now_us, refresh_window_us=refresh_window_us)
        for receiver in graph.vertices:
            for source, entry in shortest_paths(graph, receiver).items():
                table.entries[(source, receiver)] = entry
        return table

    def is_stale(self, now_us):
        return now_us - self.epoch_us > self.refresh_window_us

    def lookup(self, source, receiver, now_us=None):
        if now_us is not None and self.is_stale(now_us):
            raise StaleRoute(f"route table epoch {self.epoch_us} expired at {now_us}")
        if source == receiver:
            return RouteEntry(None, 0.0, ())
        try:
            return self.entries[(source, receiver)]
        except KeyError:
            raise UnknownReceiver(f"no route {source} -> {receiver}") from None


def route_cost(table, source_ap, receiver, now_us=None):
    return table.lookup(source_ap, receiver, now_us).cost_us
