import pytest

from overlay_sim.engine import ZERO, SimRandom
from overlay_sim.overlay import DiscoverySource, Overlay
from overlay_sim.strategy import ConnectionManager, StrategyKind


@pytest.fixture
def rng():
    return SimRandom(1234)


def build_overlay(n, max_peer_set=80, max_outgoing=40):
    overlay = Overlay()
    for _ in range(n):
        overlay.add_peer(max_peer_set, max_outgoing, ZERO)
    return overlay


def connect(overlay, initiator, acceptor, source=DiscoverySource.TRACKER):
    return overlay.open_connection(initiator, acceptor, source, ZERO)


def build_manager(overlay, rng, kind=StrategyKind.TRACKER_DEFAULT, **kwargs):
    return ConnectionManager(overlay, rng, kind, **kwargs)
