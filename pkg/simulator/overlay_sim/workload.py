"""Flash-crowd arrivals and uniform peer lifetimes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from overlay_sim.engine import ZERO, SimRandom, SimTime


class WorkloadConfig(BaseModel):
    """Durations are in simulated minutes."""

    model_config = ConfigDict(frozen=True)

    slot_length: float = Field(default=10.0, gt=0)
    amplitude: int = Field(default=1000, gt=0)
    decay: float = Field(default=0.7, gt=0)
    active_slots: int = Field(default=4, ge=0)
    lifetime_min: float = Field(default=10.0, ge=0)
    lifetime_max: float = Field(default=20.0, ge=0)
    seed_peer_immortal: bool = True

    @model_validator(mode="after")
    def _lifetimes_ordered(self) -> WorkloadConfig:
        if self.lifetime_min > self.lifetime_max:
            raise ValueError(f"lifetime_min {self.lifetime_min} exceeds lifetime_max {self.lifetime_max}")
        return self


@dataclass(frozen=True, slots=True)
class Arrival:
    join_index: int
    join_time: SimTime
    # None for a peer that stays until the end of the run.
    leave_time: Optional[SimTime]


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


class FlashCrowd:
    def __init__(self, config: WorkloadConfig, rng: SimRandom):
        self.config = config
        self.rng = rng
        self._slot_ticks = SimTime.minutes(config.slot_length).ticks

    def arrivals_for_slot(self, i: int) -> int:
        """Arrivals during slot i (1-based).

        Each slot decays the previous slot's rounded count by e^-decay and rounds again, which yields
        1000, 497, 247, 123 under the defaults.
        """
        if i < 1:
            raise ValueError(f"slots are numbered from 1, got {i}")
        if i > self.config.active_slots:
            return 0
        factor = math.exp(-self.config.decay)
        count = self.config.amplitude
        for _ in range(i - 1):
            count = _round_half_up(count * factor)
        return count

    def sample_arrival_times(self, slot: int, count: int) -> list[SimTime]:
        if count < 0:
            raise ValueError(f"negative arrival count {count}")
        start = self._slot_ticks * (slot - 1)
        return sorted(SimTime(start + self.rng.below(self._slot_ticks)) for _ in range(count))

    def sample_lifetime(self) -> SimTime:
        return SimTime.minutes(self.rng.uniform(self.config.lifetime_min, self.config.lifetime_max))

    def build_schedule(self) -> list[Arrival]:
        """The initial seed at t=0 followed by every slot's arrivals in join order."""
        arrivals = [Arrival(0, ZERO, None if self.config.seed_peer_immortal else self.sample_lifetime())]
        for slot in range(1, self.config.active_slots + 1):
            for join_time in self.sample_arrival_times(slot, self.arrivals_for_slot(slot)):
                arrivals.append(Arrival(len(arrivals), join_time, join_time + self.sample_lifetime()))
        return arrivals
