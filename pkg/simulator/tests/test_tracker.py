from collections import Counter

import pytest

from overlay_sim.engine import ZERO, SimRandom, SimTime
from overlay_sim.errors import TrackerError
from overlay_sim.tracker import Denied, TrackerConfig, TrackerRegistry


def minutes(value):
    return SimTime.minutes(value)


def registry_with(n, seed=0, **config):
    tracker = TrackerRegistry(TrackerConfig(**config), SimRandom(seed))
    for peer in range(n):
        tracker.announce_join(peer, ZERO)
    return tracker


def test_first_peer_gets_an_empty_list():
    tracker = registry_with(0)
    assert tracker.announce_join(0, ZERO) == []
    assert 0 in tracker


def test_small_swarm_returns_every_member():
    tracker = registry_with(5)
    assert sorted(tracker.announce_join(5, ZERO)) == [0, 1, 2, 3, 4]
    assert len(tracker) == 6


def test_response_is_capped_and_excludes_the_requester():
    tracker = registry_with(200)
    response = tracker.announce_join(200, ZERO)
    assert len(response) == 80
    assert len(set(response)) == 80
    assert 200 not in response


def test_double_join_is_an_error():
    tracker = registry_with(3)
    with pytest.raises(TrackerError):
        tracker.announce_join(1, ZERO)


def test_response_inclusion_is_uniform():
    # 5000 fresh draws; the standard error of each frequency is about 0.007.
    counts: Counter[int] = Counter()
    trials = 5000
    tracker = registry_with(200)
    for seed in range(trials):
        tracker.rng = SimRandom(seed)
        counts.update(tracker.announce_join(200, ZERO))
        tracker.announce_leave(200, ZERO)
    for member in range(200):
        assert counts[member] / trials == pytest.approx(80 / 200, abs=0.05)


def test_reannounce_is_rate_limited():
    tracker = registry_with(10)
    first = tracker.announce_more(3, minutes(10))
    assert isinstance(first, list)
    denied = tracker.announce_more(3, minutes(12))
    assert denied == Denied(retry_at=minutes(15))
    again = tracker.announce_more(3, minutes(16))
    assert isinstance(again, list)
    assert 3 not in again


def test_join_counts_as_a_request():
    tracker = registry_with(0)
    tracker.announce_join(0, minutes(2))
    assert isinstance(tracker.announce_more(0, minutes(4)), Denied)
    assert tracker.announce_more(0, minutes(7)) == []


def test_reannounce_of_unknown_peer_is_an_error():
    with pytest.raises(TrackerError):
        registry_with(2).announce_more(7, minutes(10))


def test_responses_skip_departed_peers():
    tracker = registry_with(6)
    tracker.announce_leave(2, minutes(1))
    tracker.announce_leave(2, minutes(1))
    tracker.announce_leave(42, minutes(1))
    assert 2 not in tracker.announce_join(6, minutes(1))
    assert 2 not in tracker.announce_more(0, minutes(10))


def test_heartbeat_keeps_a_peer_registered():
    tracker = registry_with(1)
    tracker.heartbeat(0, minutes(10))
    assert tracker.expire_stale(minutes(54)) == []
    assert 0 in tracker


def test_silent_peer_expires():
    tracker = registry_with(1)
    tracker.heartbeat(0, minutes(10))
    assert tracker.expire_stale(minutes(56)) == [0]
    assert 0 not in tracker


def test_heartbeat_from_expired_peer_is_ignored():
    tracker = registry_with(1)
    tracker.expire_stale(minutes(50))
    tracker.heartbeat(0, minutes(51))
    assert 0 not in tracker


def test_after_expiry_every_member_is_recent():
    tracker = registry_with(0)
    for peer in range(20):
        tracker.announce_join(peer, minutes(peer * 5))
    now = minutes(120)
    tracker.expire_stale(now)
    assert tracker.members
    assert all(seen.ticks >= now.ticks - tracker.expiry_timeout.ticks for seen in tracker.last_heartbeat.values())


def test_announces_expire_stale_members_first():
    tracker = registry_with(3)
    tracker.announce_join(3, minutes(50))
    assert sorted(tracker.members) == [3]


def test_announce_refreshes_the_heartbeat():
    tracker = registry_with(2)
    tracker.announce_more(0, minutes(40))
    tracker.announce_join(2, minutes(60))
    assert sorted(tracker.members) == [0, 2]
