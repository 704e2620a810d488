"""Runtime checks of the overlay and strategy invariants, run after every simulation event."""

from __future__ import annotations

from typing import Any, Iterable, Mapping, Optional

from overlay_sim.engine import Event
from overlay_sim.errors import InvariantViolation
from overlay_sim.overlay import DiscoverySource, Overlay, PeerId
from overlay_sim.strategy import AcceptedWithPreemption, AttemptOutcome, ConnectionManager, StrategyKind


def always(condition: bool, message: str, details: Optional[Mapping[str, Any]] = None) -> None:
    if not condition:
        raise InvariantViolation(message, details)


def check_peer(overlay: Overlay, peer: PeerId, preemption_cap: Optional[int] = None) -> None:
    state = overlay.peer(peer)
    if not state.alive:
        always(not state.peer_set, "departed peer still holds connections", {"peer": peer})
        return

    always(
        state.peer_set_size <= state.max_peer_set,
        "peer set exceeds its maximum",
        {"peer": peer, "size": state.peer_set_size, "max": state.max_peer_set},
    )
    always(
        state.outgoing_count <= state.max_outgoing,
        "outgoing connections exceed O_max",
        {"peer": peer, "outgoing": state.outgoing_count, "max": state.max_outgoing},
    )
    always(peer not in state.known_addresses, "peer knows its own address", {"peer": peer})

    initiated = 0
    preempted_in = 0
    for neighbor, record in state.peer_set.items():
        always(neighbor != peer, "self-loop", {"peer": peer})
        always(
            {record.initiator, record.acceptor} == {peer, neighbor},
            "record filed under the wrong neighbour",
            {"peer": peer, "neighbor": neighbor},
        )
        other = overlay.peer(neighbor)
        always(other.alive, "connection to a departed peer", {"peer": peer, "neighbor": neighbor})
        always(
            other.peer_set.get(peer) is record,
            "connection is not symmetric",
            {"peer": peer, "neighbor": neighbor},
        )
        if record.initiator == peer:
            initiated += 1
        elif record.preempted:
            preempted_in += 1

    always(
        initiated == state.outgoing_count,
        "outgoing count disagrees with the connection flags",
        {"peer": peer, "counted": initiated, "recorded": state.outgoing_count},
    )
    always(
        preempted_in == state.preempted_in_count,
        "preempted-in count disagrees with the connection flags",
        {"peer": peer, "counted": preempted_in, "recorded": state.preempted_in_count},
    )
    if preemption_cap is not None:
        always(
            preempted_in <= preemption_cap,
            "peer holds more preempted connections than the cap allows",
            {"peer": peer, "held": preempted_in, "cap": preemption_cap},
        )


def check_overlay(overlay: Overlay, peers: Optional[Iterable[PeerId]] = None, preemption_cap: Optional[int] = None):
    """Checks the given peers (all peers when omitted) plus the global edge identity."""
    targets = range(len(overlay)) if peers is None else peers
    for peer in targets:
        check_peer(overlay, peer, preemption_cap)
    total_outgoing = sum(state.outgoing_count for state in overlay.peers)
    always(
        total_outgoing == overlay.edge_count,
        "sum of outgoing counts differs from the number of edges",
        {"outgoing": total_outgoing, "edges": overlay.edge_count},
    )


class InvariantMonitor:
    """Attaches to a run; re-checks every peer an event touched, and every preemption as it happens."""

    def __init__(self, overlay: Overlay, manager: ConnectionManager, max_peer_set: int):
        self.overlay = overlay
        self.manager = manager
        self.cap = manager.preemption.cap(max_peer_set)
        self.events_checked = 0
        self.preemptions_checked = 0
        manager.observers.append(self.on_outcome)

    def on_outcome(self, initiator: PeerId, target: PeerId, outcome: AttemptOutcome) -> None:
        if not isinstance(outcome, AcceptedWithPreemption):
            return
        always(
            self.manager.kind is StrategyKind.PREEMPTION,
            "preemption under the default strategy",
            {"initiator": initiator, "target": target},
        )
        always(
            outcome.record.source is DiscoverySource.TRACKER,
            "preemption without a tracker-discovered address",
            {"initiator": initiator, "target": target},
        )
        acceptor = self.overlay.peer(target)
        always(
            acceptor.peer_set_size == acceptor.max_peer_set,
            "preempting target did not stay exactly full",
            {"target": target, "size": acceptor.peer_set_size},
        )
        self.preemptions_checked += 1

    def after_event(self, event: Event) -> None:
        check_overlay(self.overlay, sorted(self.overlay.drain_touched()), self.cap)
        self.events_checked += 1
