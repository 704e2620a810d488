from overlay_sim.config import ExperimentConfig, build_config, load_config_file
from overlay_sim.engine import TICKS_PER_MINUTE, ZERO, Engine, Event, EventKind, SimRandom, SimTime
from overlay_sim.errors import (
    ConfigError,
    EmptyRangeError,
    HarnessError,
    InvariantViolation,
    OutputError,
    OverlayError,
    SchedulingError,
    SimulationError,
    StrategyError,
    TrackerError,
)
from overlay_sim.harness import AggregateRow, RunResult, aggregate, derive_seed, run_single, sweep, write_outputs
from overlay_sim.metrics import (
    MetricsSnapshot,
    OverlaySnapshot,
    average_peer_set_size,
    bottleneck_index,
    diameter,
    measure,
    oracle_diameter,
)
from overlay_sim.overlay import ConnectionRecord, DiscoverySource, Overlay, PeerState
from overlay_sim.simulation import RunParameters, Simulation
from overlay_sim.strategy import ConnectionManager, PreemptionConfig, StrategyKind
from overlay_sim.tracker import Denied, TrackerConfig, TrackerRegistry
from overlay_sim.workload import Arrival, FlashCrowd, WorkloadConfig

__version__ = "0.1.0"

__all__ = [
    "AggregateRow",
    "Arrival",
    "ConfigError",
    "ConnectionManager",
    "ConnectionRecord",
    "Denied",
    "DiscoverySource",
    "EmptyRangeError",
    "Engine",
    "Event",
    "EventKind",
    "ExperimentConfig",
    "FlashCrowd",
    "HarnessError",
    "InvariantViolation",
    "MetricsSnapshot",
    "OutputError",
    "Overlay",
    "OverlayError",
    "OverlaySnapshot",
    "PeerState",
    "PreemptionConfig",
    "RunParameters",
    "RunResult",
    "SchedulingError",
    "SimRandom",
    "SimTime",
    "Simulation",
    "SimulationError",
    "StrategyError",
    "StrategyKind",
    "TICKS_PER_MINUTE",
    "TrackerConfig",
    "TrackerError",
    "TrackerRegistry",
    "WorkloadConfig",
    "ZERO",
    "aggregate",
    "average_peer_set_size",
    "bottleneck_index",
    "build_config",
    "derive_seed",
    "diameter",
    "load_config_file",
    "measure",
    "oracle_diameter",
    "run_single",
    "sweep",
    "write_outputs",
]
