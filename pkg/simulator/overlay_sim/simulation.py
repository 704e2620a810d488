"""One simulated torrent: wires the engine, overlay, tracker, strategy and workload together."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

from overlay_sim import console
from overlay_sim.engine import Engine, Event, EventKind, SimTime, TraceEntry, format_minutes
from overlay_sim.errors import ConfigError, SimulationError
from overlay_sim.invariants import InvariantMonitor
from overlay_sim.metrics import MetricsSnapshot, OverlaySnapshot, measure
from overlay_sim.overlay import Overlay, PeerId
from overlay_sim.strategy import ConnectionManager, PreemptionConfig, StrategyKind
from overlay_sim.tracker import Denied, TrackerConfig, TrackerRegistry
from overlay_sim.workload import Arrival, FlashCrowd, WorkloadConfig


class RunParameters(BaseModel):
    model_config = ConfigDict(frozen=True)

    strategy: StrategyKind = StrategyKind.TRACKER_DEFAULT
    omax: int = Field(default=40, ge=1)
    max_peer_set: int = Field(default=80, ge=1)
    min_neighbors: int = Field(default=20, ge=0)
    first_group_size: int = Field(default=80, ge=1)
    ungraceful_leaves: bool = False
    tracker: TrackerConfig = TrackerConfig()
    workload: WorkloadConfig = WorkloadConfig()
    preemption: PreemptionConfig = PreemptionConfig()

    @model_validator(mode="after")
    def _omax_within_peer_set(self) -> RunParameters:
        if self.omax > self.max_peer_set:
            raise ValueError(f"omax {self.omax} exceeds max_peer_set {self.max_peer_set}")
        return self


@dataclass(frozen=True)
class RunOutput:
    snapshots: list[OverlaySnapshot]
    metrics: list[MetricsSnapshot]
    events_processed: int
    trace: list[TraceEntry]


class Simulation:
    """A single deterministic run. Build one per (parameters, seed) and call `run` once."""

    def __init__(
        self,
        params: RunParameters,
        seed: int,
        *,
        check_invariants: bool = False,
        record_trace: bool = False,
    ):
        self.params = params
        self.seed = seed
        self.engine = Engine(seed, record_trace=record_trace)
        self.overlay = Overlay()
        self.tracker = TrackerRegistry(params.tracker, self.engine.rng)
        self.manager = ConnectionManager(
            self.overlay,
            self.engine.rng,
            params.strategy,
            min_neighbors=params.min_neighbors,
            preemption=params.preemption,
            schedule_reannounce=self.schedule_reannounce,
        )
        self.workload = FlashCrowd(params.workload, self.engine.rng)
        self.snapshots: list[OverlaySnapshot] = []
        self.monitor: Optional[InvariantMonitor] = None
        if check_invariants:
            self.monitor = InvariantMonitor(self.overlay, self.manager, params.max_peer_set)
            self.engine.after_each_event(self.monitor.after_event)

        self.engine.on(EventKind.PEER_JOIN, self._on_join)
        self.engine.on(EventKind.PEER_LEAVE, self._on_leave)
        self.engine.on(EventKind.TRACKER_REANNOUNCE, self._on_reannounce)
        self.engine.on(EventKind.HEARTBEAT, self._on_heartbeat)
        self.engine.on(EventKind.SNAPSHOT, self._on_snapshot)
        self._arrivals: dict[PeerId, Arrival] = {}
        self._started = False

    def run(self, snapshot_times: Sequence[SimTime], horizon: SimTime) -> RunOutput:
        if self._started:
            raise SimulationError("a simulation runs only once")
        self._started = True
        late = [t for t in snapshot_times if t > horizon]
        if late:
            raise ConfigError(f"snapshot time {late[0]} is after the horizon {horizon}")

        # Snapshots go in first so they precede same-instant workload events.
        for t in sorted(set(snapshot_times)):
            self.engine.schedule(t, EventKind.SNAPSHOT, label=format_minutes(t))
        schedule = self.workload.build_schedule()
        for arrival in schedule:
            self._arrivals[arrival.join_index] = arrival
            self.engine.schedule(arrival.join_time, EventKind.PEER_JOIN, peer=arrival.join_index)

        processed = self.engine.run_until(horizon)
        if console.enabled(console.DEBUG):
            console.debug(
                f"seed={self.seed} {self.params.strategy.value} omax={self.params.omax}: "
                f"{processed} events, {len(self.overlay)} peers joined, {self.overlay.edge_count} edges at {horizon}"
            )
        return RunOutput(
            snapshots=list(self.snapshots),
            metrics=[measure(s) for s in self.snapshots],
            events_processed=processed,
            trace=list(self.engine.trace),
        )

    def schedule_reannounce(self, peer: PeerId, now: SimTime) -> None:
        state = self.overlay.peer(peer)
        if state.reannounce_pending or not state.alive:
            return
        at = now
        if state.last_tracker_request is not None:
            at = max(now, state.last_tracker_request + self.tracker.min_request_interval)
        state.reannounce_pending = True
        self.engine.schedule(at, EventKind.TRACKER_REANNOUNCE, peer=peer)

    def _on_join(self, event: Event) -> None:
        assert event.peer is not None
        now = event.time
        state = self.overlay.add_peer(self.params.max_peer_set, self.params.omax, now)
        if state.id != event.peer:
            raise SimulationError(f"peer joined out of order: expected index {event.peer}, got {state.id}")

        initial_set = self.tracker.announce_join(state.id, now)
        state.last_tracker_request = now
        self.manager.on_join(state.id, initial_set, now)

        arrival = self._arrivals[state.id]
        if arrival.leave_time is not None:
            self.engine.schedule(arrival.leave_time, EventKind.PEER_LEAVE, peer=state.id)
        self.engine.schedule(now + self.tracker.heartbeat_period, EventKind.HEARTBEAT, peer=state.id)

    def _on_leave(self, event: Event) -> None:
        assert event.peer is not None
        if not self.overlay.is_alive(event.peer):
            return
        self.overlay.remove_peer(event.peer, event.time)
        self.manager.settle()
        if not self.params.ungraceful_leaves:
            self.tracker.announce_leave(event.peer, event.time)

    def _on_reannounce(self, event: Event) -> None:
        assert event.peer is not None
        now = event.time
        state = self.overlay.peer(event.peer)
        state.reannounce_pending = False
        if not state.alive or state.peer_set_size >= self.params.min_neighbors:
            return
        if event.peer not in self.tracker:
            # Expired by the tracker.
            return

        response = self.tracker.announce_more(state.id, now)
        if isinstance(response, Denied):
            state.reannounce_pending = True
            self.engine.schedule(response.retry_at, EventKind.TRACKER_REANNOUNCE, peer=state.id)
            return
        state.last_tracker_request = now
        self.manager.on_more_peers(state.id, response, now)
        if state.alive and state.peer_set_size < self.params.min_neighbors:
            self.schedule_reannounce(state.id, now)

    def _on_heartbeat(self, event: Event) -> None:
        assert event.peer is not None
        if not self.overlay.is_alive(event.peer):
            return
        self.tracker.heartbeat(event.peer, event.time)
        self.engine.schedule(event.time + self.tracker.heartbeat_period, EventKind.HEARTBEAT, peer=event.peer)

    def _on_snapshot(self, event: Event) -> None:
        alive = tuple(state.id for state in self.overlay.alive_peers())
        self.snapshots.append(
            OverlaySnapshot(
                taken_at=event.time,
                alive_peers=alive,
                edges=tuple(self.overlay.snapshot_edges()),
                max_peer_set=self.params.max_peer_set,
                first_group_size=self.params.first_group_size,
                label=event.label or "",
            )
        )
