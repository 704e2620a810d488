"""The overlay graph: peers, flagged connections and the two per-peer connection limits."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, Optional

from overlay_sim.engine import SimTime
from overlay_sim.errors import OverlayError

PeerId = int


class DiscoverySource(Enum):
    TRACKER = "tracker"
    OTHER = "other"


@dataclass(eq=False, slots=True)
class ConnectionRecord:
    """One undirected connection; outgoing for the initiator, incoming for the acceptor.

    `source` is how the initiator learned the acceptor's address. `preempted` marks a connection
    the acceptor admitted by dropping another one.
    """

    initiator: PeerId
    acceptor: PeerId
    source: DiscoverySource
    opened_at: SimTime
    preempted: bool = False

    def other(self, peer: PeerId) -> PeerId:
        return self.acceptor if peer == self.initiator else self.initiator

    def pair(self) -> tuple[PeerId, PeerId]:
        return (self.initiator, self.acceptor) if self.initiator < self.acceptor else (self.acceptor, self.initiator)


@dataclass(slots=True)
class PeerState:
    id: PeerId
    max_peer_set: int
    max_outgoing: int
    joined_at: SimTime
    peer_set: dict[PeerId, ConnectionRecord] = field(default_factory=dict)
    outgoing_count: int = 0
    preempted_in_count: int = 0
    known_addresses: dict[PeerId, DiscoverySource] = field(default_factory=dict)
    last_tracker_request: Optional[SimTime] = None
    departure_time: Optional[SimTime] = None
    reannounce_pending: bool = False

    @property
    def alive(self) -> bool:
        return self.departure_time is None

    @property
    def peer_set_size(self) -> int:
        return len(self.peer_set)

    @property
    def is_full(self) -> bool:
        return len(self.peer_set) >= self.max_peer_set

    @property
    def can_initiate(self) -> bool:
        return self.outgoing_count < self.max_outgoing and len(self.peer_set) < self.max_peer_set

    def learn(self, address: PeerId, source: DiscoverySource) -> None:
        # Other -> Tracker upgrades; nothing downgrades.
        if address == self.id:
            return
        current = self.known_addresses.get(address)
        if current is None or source is DiscoverySource.TRACKER:
            self.known_addresses[address] = source

    def forget(self, address: PeerId) -> None:
        self.known_addresses.pop(address, None)

    def incoming(self) -> list[ConnectionRecord]:
        return [record for record in self.peer_set.values() if record.acceptor == self.id]


DropHook = Callable[[PeerId, PeerId, SimTime], None]


class Overlay:
    """Owns every peer of a run, indexed densely by join order.

    `on_drop(peer, former_neighbor, now)` is invoked for both endpoints of every closed connection.
    Peers whose state changed are collected in `touched` until `drain_touched` is called.
    """

    def __init__(self, on_drop: Optional[DropHook] = None):
        self.peers: list[PeerState] = []
        self.on_drop = on_drop
        self.edge_count = 0
        self.touched: set[PeerId] = set()

    def __len__(self) -> int:
        return len(self.peers)

    def add_peer(self, max_peer_set: int, max_outgoing: int, now: SimTime) -> PeerState:
        state = PeerState(len(self.peers), max_peer_set, max_outgoing, now)
        self.peers.append(state)
        self.touched.add(state.id)
        return state

    def peer(self, peer: PeerId) -> PeerState:
        if not 0 <= peer < len(self.peers):
            raise OverlayError(f"unknown peer {peer}")
        return self.peers[peer]

    def is_alive(self, peer: PeerId) -> bool:
        return 0 <= peer < len(self.peers) and self.peers[peer].alive

    def alive_peers(self) -> Iterator[PeerState]:
        return (state for state in self.peers if state.alive)

    def connected(self, a: PeerId, b: PeerId) -> bool:
        return b in self.peer(a).peer_set

    def open_connection(
        self,
        initiator: PeerId,
        acceptor: PeerId,
        source: DiscoverySource,
        now: SimTime,
        *,
        preempted: bool = False,
    ) -> ConnectionRecord:
        a = self.peer(initiator)
        b = self.peer(acceptor)
        if initiator == acceptor:
            raise OverlayError(f"peer {initiator} cannot connect to itself")
        if not a.alive or not b.alive:
            raise OverlayError(f"connection {initiator}->{acceptor} involves a departed peer")
        if acceptor in a.peer_set:
            raise OverlayError(f"peers {initiator} and {acceptor} are already connected")
        if a.outgoing_count >= a.max_outgoing:
            raise OverlayError(f"peer {initiator} is at its outgoing limit {a.max_outgoing}")
        if a.is_full or b.is_full:
            raise OverlayError(f"connection {initiator}->{acceptor} would exceed a peer set limit")

        record = ConnectionRecord(initiator, acceptor, source, now, preempted)
        a.peer_set[acceptor] = record
        b.peer_set[initiator] = record
        a.outgoing_count += 1
        if preempted:
            b.preempted_in_count += 1
        self.edge_count += 1
        self.touched.add(initiator)
        self.touched.add(acceptor)
        return record

    def close_connection(self, record: ConnectionRecord, now: SimTime) -> None:
        a = self.peer(record.initiator)
        b = self.peer(record.acceptor)
        if a.peer_set.get(record.acceptor) is not record or b.peer_set.get(record.initiator) is not record:
            raise OverlayError(f"connection {record.initiator}->{record.acceptor} is not open")

        del a.peer_set[record.acceptor]
        del b.peer_set[record.initiator]
        a.outgoing_count -= 1
        if record.preempted:
            b.preempted_in_count -= 1
        self.edge_count -= 1
        self.touched.add(record.initiator)
        self.touched.add(record.acceptor)
        if self.on_drop is not None:
            self.on_drop(record.initiator, record.acceptor, now)
            self.on_drop(record.acceptor, record.initiator, now)

    def remove_peer(self, peer: PeerId, now: SimTime) -> list[PeerId]:
        state = self.peer(peer)
        if not state.alive:
            raise OverlayError(f"peer {peer} has already departed")
        # Mark first so the drop hook sees the departing endpoint as gone.
        state.departure_time = now
        neighbors = list(state.peer_set)
        for record in list(state.peer_set.values()):
            self.close_connection(record, now)
        self.touched.add(peer)
        return neighbors

    def snapshot_edges(self, alive_only: bool = True) -> list[tuple[PeerId, PeerId]]:
        edges = []
        for state in self.peers:
            if alive_only and not state.alive:
                continue
            for neighbor in state.peer_set:
                if state.id < neighbor and (not alive_only or self.peers[neighbor].alive):
                    edges.append((state.id, neighbor))
        edges.sort()
        return edges

    def drain_touched(self) -> set[PeerId]:
        touched, self.touched = self.touched, set()
        return touched
