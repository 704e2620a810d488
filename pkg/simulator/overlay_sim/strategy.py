"""Connection establishment: the default tracker strategy and the preemption strategy."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from overlay_sim.engine import SimRandom, SimTime
from overlay_sim.errors import StrategyError
from overlay_sim.overlay import ConnectionRecord, DiscoverySource, Overlay, PeerId, PeerState


class StrategyKind(Enum):
    TRACKER_DEFAULT = "tracker"
    PREEMPTION = "preemption"


class PreemptionConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    # Fraction of max_peer_set that may be held through preemption; None means unlimited.
    cap_fraction: Optional[float] = Field(default=None, gt=0, le=1)

    def cap(self, max_peer_set: int) -> Optional[int]:
        if self.cap_fraction is None:
            return None
        return math.ceil(self.cap_fraction * max_peer_set)


class RejectReason(Enum):
    TARGET_GONE = "target-gone"
    TARGET_FULL = "target-full"


@dataclass(frozen=True, slots=True)
class Accepted:
    record: ConnectionRecord


@dataclass(frozen=True, slots=True)
class Rejected:
    reason: RejectReason


@dataclass(frozen=True, slots=True)
class AcceptedWithPreemption:
    record: ConnectionRecord
    dropped: ConnectionRecord


AttemptOutcome = Union[Accepted, Rejected, AcceptedWithPreemption]
OutcomeObserver = Callable[[PeerId, PeerId, AttemptOutcome], None]
ReannounceScheduler = Callable[[PeerId, SimTime], None]


class ConnectionManager:
    """Applies one strategy to every connection attempt of a run.

    Drop notifications raised by the overlay are queued and settled iteratively at the end of the
    operation that caused them, so a preemption is complete before anyone reacts to it.

    A dropped peer's recovery attempt follows the run's strategy, so under preemption it may drop
    another connection in turn. Within one settle at most `max_chain_preemptions` recoveries may
    preempt (default: the number of peers); later ones only take free slots.
    """

    def __init__(
        self,
        overlay: Overlay,
        rng: SimRandom,
        kind: StrategyKind,
        *,
        min_neighbors: int = 20,
        preemption: Optional[PreemptionConfig] = None,
        schedule_reannounce: Optional[ReannounceScheduler] = None,
        max_chain_preemptions: Optional[int] = None,
    ):
        self.overlay = overlay
        self.rng = rng
        self.kind = kind
        self.min_neighbors = min_neighbors
        self.preemption = preemption or PreemptionConfig()
        self.schedule_reannounce = schedule_reannounce
        self.observers: list[OutcomeObserver] = []
        self._drops: deque[tuple[PeerId, PeerId, SimTime]] = deque()
        self._settling = False
        self.max_chain_preemptions = max_chain_preemptions
        self.chain_preemptions = 0
        overlay.on_drop = self._queue_drop

    def _queue_drop(self, peer: PeerId, former_neighbor: PeerId, now: SimTime) -> None:
        self._drops.append((peer, former_neighbor, now))

    def settle(self) -> None:
        if self._settling:
            return
        self._settling = True
        self.chain_preemptions = 0
        try:
            while self._drops:
                peer, former_neighbor, now = self._drops.popleft()
                self.on_connection_dropped(peer, now, dropped_by=former_neighbor)
        finally:
            self._settling = False

    def _below_min_neighbors(self, state: PeerState, now: SimTime) -> None:
        if state.peer_set_size < self.min_neighbors and self.schedule_reannounce is not None:
            self.schedule_reannounce(state.id, now)

    def _connect_to(self, state: PeerState, addresses: Iterable[PeerId], now: SimTime) -> None:
        for target in self.rng.shuffled(list(addresses)):
            if not state.can_initiate:
                break
            # Already neighbours: a second path is a no-op.
            if target in state.peer_set or target == state.id:
                continue
            self.attempt_outgoing(state.id, target, now)

    def on_join(self, peer: PeerId, initial_set: list[PeerId], now: SimTime) -> None:
        state = self.overlay.peer(peer)
        for address in initial_set:
            state.learn(address, DiscoverySource.TRACKER)
        self._connect_to(state, initial_set, now)
        self.settle()
        self._below_min_neighbors(state, now)

    def on_more_peers(self, peer: PeerId, new_addresses: list[PeerId], now: SimTime) -> None:
        state = self.overlay.peer(peer)
        for address in new_addresses:
            state.learn(address, DiscoverySource.TRACKER)
        self._connect_to(state, new_addresses, now)
        self.settle()

    def attempt_outgoing(
        self,
        initiator: PeerId,
        target: PeerId,
        now: SimTime,
        *,
        allow_preemption: bool = True,
    ) -> AttemptOutcome:
        state = self.overlay.peer(initiator)
        if not state.alive:
            raise StrategyError(f"departed peer {initiator} cannot initiate connections")
        if not state.can_initiate:
            raise StrategyError(f"peer {initiator} has no room for another outgoing connection")
        if target == initiator or target in state.peer_set:
            raise StrategyError(f"peer {initiator} cannot open a second connection to {target}")

        outcome = self._attempt(state, target, now, allow_preemption)
        for observer in self.observers:
            observer(initiator, target, outcome)
        return outcome

    def _attempt(self, state: PeerState, target: PeerId, now: SimTime, allow_preemption: bool) -> AttemptOutcome:
        if not self.overlay.is_alive(target):
            state.forget(target)
            return Rejected(RejectReason.TARGET_GONE)

        source = state.known_addresses.get(target, DiscoverySource.OTHER)
        acceptor = self.overlay.peer(target)
        if not acceptor.is_full:
            record = self.overlay.open_connection(state.id, target, source, now)
            acceptor.learn(state.id, DiscoverySource.OTHER)
            return Accepted(record)

        if self.kind is not StrategyKind.PREEMPTION or not allow_preemption:
            return Rejected(RejectReason.TARGET_FULL)
        if source is not DiscoverySource.TRACKER:
            return Rejected(RejectReason.TARGET_FULL)

        victim = self.select_drop_victim(target)
        cap = self.preemption.cap(acceptor.max_peer_set)
        if cap is not None:
            held_after = acceptor.preempted_in_count + (0 if victim.preempted else 1)
            if held_after > cap:
                return Rejected(RejectReason.TARGET_FULL)

        self.overlay.close_connection(victim, now)
        record = self.overlay.open_connection(state.id, target, source, now, preempted=True)
        acceptor.learn(state.id, DiscoverySource.OTHER)
        return AcceptedWithPreemption(record, victim)

    def select_drop_victim(self, target: PeerId) -> ConnectionRecord:
        state = self.overlay.peer(target)
        if not state.peer_set:
            raise StrategyError(f"peer {target} has no connection to drop")
        incoming = state.incoming()
        return self.rng.choice(incoming or list(state.peer_set.values()))

    def on_connection_dropped(self, victim_peer: PeerId, now: SimTime, dropped_by: Optional[PeerId] = None) -> None:
        if not self.overlay.is_alive(victim_peer):
            return
        state = self.overlay.peer(victim_peer)
        if state.can_initiate:
            candidates = [
                address
                for address in state.known_addresses
                if address not in state.peer_set and address != dropped_by
            ]
            if candidates:
                limit = self.max_chain_preemptions
                if limit is None:
                    limit = len(self.overlay)
                allow = self.chain_preemptions < limit
                outcome = self.attempt_outgoing(victim_peer, self.rng.choice(candidates), now, allow_preemption=allow)
                if isinstance(outcome, AcceptedWithPreemption):
                    self.chain_preemptions += 1
        self._below_min_neighbors(state, now)
