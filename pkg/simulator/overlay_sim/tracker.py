"""Centralized tracker: membership, random peer lists, re-announce rate limiting and heartbeat expiry."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from pydantic import BaseModel, ConfigDict, Field

from overlay_sim.engine import SimRandom, SimTime
from overlay_sim.errors import TrackerError
from overlay_sim.overlay import PeerId


class TrackerConfig(BaseModel):
    """Durations are in simulated minutes."""

    model_config = ConfigDict(frozen=True)

    response_size: int = Field(default=80, ge=1)
    min_request_interval: float = Field(default=5.0, ge=0)
    heartbeat_period: float = Field(default=30.0, gt=0)
    expiry_timeout: float = Field(default=45.0, gt=0)


@dataclass(frozen=True, slots=True)
class Denied:
    retry_at: SimTime


AnnounceResult = Union[list[PeerId], Denied]


class TrackerRegistry:
    def __init__(self, config: TrackerConfig, rng: SimRandom):
        self.config = config
        self.rng = rng
        self.response_size = config.response_size
        self.min_request_interval = SimTime.minutes(config.min_request_interval)
        self.heartbeat_period = SimTime.minutes(config.heartbeat_period)
        self.expiry_timeout = SimTime.minutes(config.expiry_timeout)
        # Insertion-ordered so responses depend only on the seed.
        self.last_heartbeat: dict[PeerId, SimTime] = {}
        self.last_request: dict[PeerId, SimTime] = {}

    @property
    def members(self) -> list[PeerId]:
        return list(self.last_heartbeat)

    def __contains__(self, peer: PeerId) -> bool:
        return peer in self.last_heartbeat

    def __len__(self) -> int:
        return len(self.last_heartbeat)

    def _random_subset(self, exclude: PeerId) -> list[PeerId]:
        candidates = [member for member in self.last_heartbeat if member != exclude]
        return self.rng.sample(candidates, min(self.response_size, len(candidates)))

    def announce_join(self, peer: PeerId, now: SimTime) -> list[PeerId]:
        if peer in self.last_heartbeat:
            raise TrackerError(f"peer {peer} announced its join twice")
        self.expire_stale(now)
        response = self._random_subset(exclude=peer)
        self.last_heartbeat[peer] = now
        self.last_request[peer] = now
        return response

    def announce_more(self, peer: PeerId, now: SimTime) -> AnnounceResult:
        if peer not in self.last_heartbeat:
            raise TrackerError(f"peer {peer} is not registered with the tracker")
        previous = self.last_request.get(peer)
        if previous is not None and now.ticks - previous.ticks < self.min_request_interval.ticks:
            return Denied(previous + self.min_request_interval)
        self.last_request[peer] = now
        self.last_heartbeat[peer] = now
        self.expire_stale(now)
        return self._random_subset(exclude=peer)

    def heartbeat(self, peer: PeerId, now: SimTime) -> None:
        # An expired peer is not re-registered by a late heartbeat.
        if peer in self.last_heartbeat:
            self.last_heartbeat[peer] = now

    def announce_leave(self, peer: PeerId, now: SimTime) -> None:
        self.last_heartbeat.pop(peer, None)
        self.last_request.pop(peer, None)

    def expire_stale(self, now: SimTime) -> list[PeerId]:
        deadline = now.ticks - self.expiry_timeout.ticks
        expired = [peer for peer, seen in self.last_heartbeat.items() if seen.ticks < deadline]
        for peer in expired:
            del self.last_heartbeat[peer]
            self.last_request.pop(peer, None)
        return expired
