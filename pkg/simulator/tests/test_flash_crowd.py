"""Full-size flash crowds with the reference parameters: ten runs per O_max value for both strategies."""

import os

import pytest

from overlay_sim.config import DEFAULT_OMAX, build_config
from overlay_sim.harness import run_single, sweep
from overlay_sim.strategy import StrategyKind

pytestmark = pytest.mark.slow

TRACKER = StrategyKind.TRACKER_DEFAULT
PREEMPTION = StrategyKind.PREEMPTION
RUNS = 10


@pytest.fixture(scope="module")
def reference_sweep():
    # Departures start at ten minutes, so the ten-minute snapshot needs no more simulated time.
    config = build_config(
        {
            "strategies": (TRACKER, PREEMPTION),
            "runs": RUNS,
            "horizon": 10,
            "base_seed": 0,
            "jobs": os.cpu_count() or 1,
        }
    )
    return sweep(config, write_edges=False)


@pytest.fixture(scope="module")
def means(reference_sweep):
    return {(row.strategy, row.omax, row.metric): row.mean for row in reference_sweep.aggregates}


def runs_of(reference_sweep, strategy, omax):
    results = [r for r in reference_sweep.results if r.strategy is strategy and r.omax == omax]
    assert len(results) == RUNS
    return results


def connected_runs(reference_sweep, strategy, omax):
    return sum(r.metrics[0].connected for r in runs_of(reference_sweep, strategy, omax))


def cross_edges(snapshot, boundary=80):
    return sum(1 for i, j in snapshot.edges if (i < boundary) != (j < boundary))


def test_ten_minute_snapshot_holds_every_early_arrival(reference_sweep):
    assert {r.metrics[0].n_alive for r in reference_sweep.results} == {1001}


def test_unlimited_outgoing_partitions_the_first_joiners(reference_sweep, means):
    # Peers 0..80 fill each other's peer sets before anyone else arrives.
    for result in runs_of(reference_sweep, TRACKER, 80):
        metrics = result.metrics[0]
        assert cross_edges(result.snapshots[0]) == 80
        assert metrics.bottleneck_index == pytest.approx(80 / 6400)
        assert not metrics.connected
        assert metrics.diameter == 0
    assert means[(TRACKER, 80, "bottleneck_index")] == pytest.approx(0.0125)


def test_bottleneck_index_peaks_at_moderate_omax(means):
    bi = {omax: means[(TRACKER, omax, "bottleneck_index")] for omax in (5, 20, 40, 60, 80)}
    assert bi[20] > bi[5]
    assert bi[20] > bi[40] > bi[60] > bi[80]


def test_peer_sets_saturate_their_outgoing_bound(means):
    # Every connection has one initiator, so the average peer set is at most 2 * O_max.
    avg = {omax: means[(TRACKER, omax, "avg_peer_set")] for omax in DEFAULT_OMAX}
    for omax, value in avg.items():
        assert value <= 2 * omax
    assert avg[30] >= 0.95 * 2 * 30
    assert avg[80] >= 0.99 * max(avg.values())
    assert avg[80] > avg[5]


def losses_against(strategy_values, baseline_values, *, higher_is_better):
    """Points where the first series loses to the baseline: (losses within 1%, losses beyond 1%)."""
    ties, losses = 0, 0
    for omax, value in strategy_values.items():
        base = baseline_values[omax]
        worse = value < base if higher_is_better else value > base
        if not worse:
            continue
        if abs(value - base) <= 0.01 * abs(base):
            ties += 1
        else:
            losses += 1
    return ties, losses


def test_preemption_has_the_higher_bottleneck_index(means):
    preempt = {omax: means[(PREEMPTION, omax, "bottleneck_index")] for omax in DEFAULT_OMAX}
    tracker = {omax: means[(TRACKER, omax, "bottleneck_index")] for omax in DEFAULT_OMAX}
    ties, losses = losses_against(preempt, tracker, higher_is_better=True)
    assert losses == 0
    assert ties <= 2


def test_preemption_has_the_smaller_diameter(reference_sweep, means):
    ties, losses = 0, 0
    for omax in DEFAULT_OMAX:
        preempt_connected = connected_runs(reference_sweep, PREEMPTION, omax)
        tracker_connected = connected_runs(reference_sweep, TRACKER, omax)
        if preempt_connected > tracker_connected:
            continue
        if preempt_connected < tracker_connected:
            losses += 1
            continue
        p = means[(PREEMPTION, omax, "diameter")]
        t = means[(TRACKER, omax, "diameter")]
        if p > t:
            if p - t <= 0.01 * t:
                ties += 1
            else:
                losses += 1
    assert losses == 0
    assert ties <= 2


def test_preemption_peer_sets_stay_close_to_the_tracker_strategy(means):
    for omax in DEFAULT_OMAX:
        preempt = means[(PREEMPTION, omax, "avg_peer_set")]
        assert preempt <= 2 * omax
        assert preempt >= 0.9 * means[(TRACKER, omax, "avg_peer_set")]


def test_preemption_is_best_with_unlimited_outgoing(reference_sweep, means):
    bi = {omax: means[(PREEMPTION, omax, "bottleneck_index")] for omax in DEFAULT_OMAX}
    avg = {omax: means[(PREEMPTION, omax, "avg_peer_set")] for omax in DEFAULT_OMAX}
    assert bi[80] >= 0.99 * max(bi.values())
    assert avg[80] >= 0.99 * max(avg.values())

    assert connected_runs(reference_sweep, PREEMPTION, 80) == RUNS
    diameters = [
        means[(PREEMPTION, omax, "diameter")]
        for omax in DEFAULT_OMAX
        if connected_runs(reference_sweep, PREEMPTION, omax) == RUNS
    ]
    assert means[(PREEMPTION, 80, "diameter")] <= 1.01 * min(diameters)


def test_preemption_breaks_the_clustering(reference_sweep):
    for result in runs_of(reference_sweep, PREEMPTION, 80):
        assert cross_edges(result.snapshots[0]) > 0
        assert result.metrics[0].bottleneck_index > 80 / 6400


@pytest.mark.parametrize("strategy", [TRACKER, PREEMPTION])
@pytest.mark.parametrize("omax", [20, 80])
def test_full_run_keeps_every_invariant(strategy, omax):
    config = build_config({"base_seed": 7, "check_invariants": True, "snapshot_times": (10, 40, 70)})
    result = run_single(config, strategy, omax, 0)
    assert [m.taken_at.as_minutes for m in result.metrics] == [10, 40, 70]
    assert result.metrics[-1].n_alive == 1
