"""Overlay metrics over immutable snapshots: bottleneck index, average peer set size, diameter."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional

import networkx as nx
import numpy as np
from scipy.sparse.csgraph import shortest_path

from overlay_sim.engine import SimTime
from overlay_sim.overlay import PeerId

ORACLE_MAX_PEERS = 200

Edge = tuple[PeerId, PeerId]


@dataclass(frozen=True)
class OverlaySnapshot:
    taken_at: SimTime
    alive_peers: tuple[PeerId, ...]
    edges: tuple[Edge, ...]
    max_peer_set: int = 80
    first_group_size: int = 80
    label: str = ""

    def __post_init__(self) -> None:
        alive = set(self.alive_peers)
        if len(alive) != len(self.alive_peers):
            raise ValueError("snapshot lists a peer twice")
        seen: set[Edge] = set()
        degree: Counter[PeerId] = Counter()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop on peer {i}")
            if i not in alive or j not in alive:
                raise ValueError(f"edge ({i}, {j}) references a peer that is not alive")
            pair = (i, j) if i < j else (j, i)
            if pair in seen:
                raise ValueError(f"duplicate edge {pair}")
            seen.add(pair)
            degree[i] += 1
            degree[j] += 1
        if degree and max(degree.values()) > self.max_peer_set:
            raise ValueError(f"a peer exceeds the maximum peer set size {self.max_peer_set}")
        object.__setattr__(self, "edges", tuple(sorted(seen)))

    @property
    def n_alive(self) -> int:
        return len(self.alive_peers)

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class MetricsSnapshot:
    taken_at: SimTime
    bottleneck_index: float
    avg_peer_set: float
    diameter: int
    connected: bool
    n_alive: int
    n_edges: int
    n_components: int


def to_graph(s: OverlaySnapshot) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(s.alive_peers)
    graph.add_edges_from(s.edges)
    return graph


def bottleneck_index(s: OverlaySnapshot) -> float:
    # The first group is fixed by join index, whether or not its members are still alive.
    first = s.first_group_size
    crossing = sum(1 for i, j in s.edges if (i < first) != (j < first))
    return crossing / (first * s.max_peer_set)


def average_peer_set_size(s: OverlaySnapshot) -> float:
    if not s.alive_peers:
        return 0.0
    return 2 * len(s.edges) / len(s.alive_peers)


def is_connected(s: OverlaySnapshot) -> bool:
    if s.n_alive == 0:
        return False
    return nx.is_connected(to_graph(s))


def component_sizes(s: OverlaySnapshot) -> list[int]:
    return sorted((len(c) for c in nx.connected_components(to_graph(s))), reverse=True)


def diameter(s: OverlaySnapshot) -> int:
    """Longest shortest-path hop count; 0 when the overlay is partitioned or has fewer than two peers."""
    if s.n_alive <= 1:
        return 0
    graph = to_graph(s)
    if not nx.is_connected(graph):
        return 0
    adjacency = nx.to_scipy_sparse_array(graph, nodelist=list(s.alive_peers), format="csr")
    hops = shortest_path(adjacency, method="D", directed=False, unweighted=True)
    return int(hops.max())


def oracle_diameter(s: OverlaySnapshot) -> int:
    """Floyd-Warshall over a dense distance matrix; same conventions as `diameter`."""
    n = s.n_alive
    if n > ORACLE_MAX_PEERS:
        raise ValueError(f"oracle is limited to {ORACLE_MAX_PEERS} peers, snapshot has {n}")
    if n <= 1:
        return 0
    position = {peer: k for k, peer in enumerate(s.alive_peers)}
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for i, j in s.edges:
        dist[position[i], position[j]] = 1.0
        dist[position[j], position[i]] = 1.0
    for k in range(n):
        dist = np.minimum(dist, dist[:, k, np.newaxis] + dist[np.newaxis, k, :])
    if np.isinf(dist).any():
        return 0
    return int(dist.max())


def connectivity_matrix(s: OverlaySnapshot) -> list[Edge]:
    return list(s.edges)


def neighbor_span(s: OverlaySnapshot, peer: PeerId) -> Optional[tuple[PeerId, PeerId]]:
    """Lowest and highest join index among a peer's neighbours, or None for an isolated peer."""
    neighbors = [j if i == peer else i for i, j in s.edges if peer in (i, j)]
    if not neighbors:
        return None
    return min(neighbors), max(neighbors)


def measure(s: OverlaySnapshot) -> MetricsSnapshot:
    graph = to_graph(s)
    components = nx.number_connected_components(graph) if s.n_alive else 0
    return MetricsSnapshot(
        taken_at=s.taken_at,
        bottleneck_index=bottleneck_index(s),
        avg_peer_set=average_peer_set_size(s),
        diameter=diameter(s),
        connected=components == 1,
        n_alive=s.n_alive,
        n_edges=s.n_edges,
        n_components=components,
    )
