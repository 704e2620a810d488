import pytest

from overlay_sim.engine import SimTime
from overlay_sim.errors import ConfigError, SimulationError
from overlay_sim.simulation import RunParameters, Simulation
from overlay_sim.strategy import StrategyKind
from overlay_sim.tracker import Denied
from overlay_sim.workload import WorkloadConfig

SMALL_WORKLOAD = WorkloadConfig(amplitude=120, active_slots=3)


def small_params(**overrides):
    fields = dict(omax=10, max_peer_set=20, min_neighbors=5, first_group_size=20, workload=SMALL_WORKLOAD)
    fields.update(overrides)
    return RunParameters(**fields)


def minutes(*values):
    return [SimTime.minutes(v) for v in values]


def run(params, seed=1, times=(10,), horizon=70, **kwargs):
    simulation = Simulation(params, seed, **kwargs)
    return simulation, simulation.run(minutes(*times), SimTime.minutes(horizon))


@pytest.mark.parametrize("strategy", list(StrategyKind))
def test_small_run_keeps_every_invariant(strategy):
    simulation, output = run(small_params(strategy=strategy), times=(10, 30, 70), check_invariants=True)
    assert simulation.monitor is not None
    assert simulation.monitor.events_checked == output.events_processed
    assert [s.label for s in output.snapshots] == ["10", "30", "70"]
    assert [m.taken_at for m in output.metrics] == minutes(10, 30, 70)


def test_snapshot_precedes_departures_at_the_same_instant():
    _, output = run(small_params())
    # Lifetimes are at least ten minutes, so nobody has left by the ten-minute snapshot.
    assert output.snapshots[0].n_alive == 1 + 120


def test_only_the_seed_remains_at_the_horizon():
    simulation, output = run(small_params(), times=(70,))
    assert output.snapshots[0].alive_peers == (0,)
    assert output.snapshots[0].edges == ()
    assert len(simulation.overlay) == 1 + 120 + 60 + 30


def test_same_seed_same_run():
    _, a = run(small_params(strategy=StrategyKind.PREEMPTION), seed=7, times=(10, 25), record_trace=True)
    _, b = run(small_params(strategy=StrategyKind.PREEMPTION), seed=7, times=(10, 25), record_trace=True)
    assert a.trace == b.trace
    assert a.snapshots == b.snapshots
    assert a.metrics == b.metrics
    _, c = run(small_params(strategy=StrategyKind.PREEMPTION), seed=8, times=(10, 25), record_trace=True)
    assert c.trace != a.trace


def test_trace_covers_every_event_kind():
    _, output = run(small_params(min_neighbors=15), record_trace=True, horizon=45, times=(10,))
    kinds = {kind for _, _, kind, _ in output.trace}
    assert {"join", "leave", "reannounce", "heartbeat", "snapshot"} <= kinds
    times = [(ticks, seq) for ticks, seq, _, _ in output.trace]
    assert [t for t, _ in times] == sorted(t for t, _ in times)


def test_reannounces_respect_the_request_interval():
    simulation = Simulation(small_params(min_neighbors=15), 1)
    requests: dict[int, list[SimTime]] = {}
    announce_more = simulation.tracker.announce_more

    def recording(peer, now):
        response = announce_more(peer, now)
        assert not isinstance(response, Denied)
        requests.setdefault(peer, []).append(now)
        return response

    simulation.tracker.announce_more = recording
    simulation.run(minutes(10), SimTime.minutes(45))
    assert requests
    interval = SimTime.minutes(5).ticks
    for peer, times in requests.items():
        previous = [simulation.overlay.peer(peer).joined_at] + times[:-1]
        assert all(b.ticks - a.ticks >= interval for a, b in zip(previous, times))


def test_graceful_leaves_keep_the_tracker_clean():
    simulation, _ = run(small_params(), times=(70,))
    assert all(simulation.overlay.is_alive(peer) for peer in simulation.tracker.members)


def test_ungraceful_leaves_linger_in_the_tracker():
    simulation, _ = run(small_params(ungraceful_leaves=True), times=(70,), check_invariants=True)
    assert any(not simulation.overlay.is_alive(peer) for peer in simulation.tracker.members)


def test_preemption_cap_is_honored_over_a_run():
    params = small_params(strategy=StrategyKind.PREEMPTION, omax=20, preemption={"cap_fraction": 0.1})
    simulation, _ = run(params, times=(10, 20), check_invariants=True)
    assert max(state.preempted_in_count for state in simulation.overlay.peers) <= 2


def test_a_simulation_runs_once():
    simulation, _ = run(small_params())
    with pytest.raises(SimulationError):
        simulation.run(minutes(10), SimTime.minutes(70))


def test_snapshot_after_horizon_is_rejected():
    with pytest.raises(ConfigError):
        run(small_params(), times=(80,), horizon=70)


def test_omax_above_peer_set_is_rejected():
    with pytest.raises(ValueError):
        RunParameters(omax=81, max_peer_set=80)
