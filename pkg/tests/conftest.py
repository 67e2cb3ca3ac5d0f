import math

import numpy as np

import pytest
from hypothesis import settings

from defiprofit.arbitrage import Edge, MarketGraph
from defiprofit.market import CONSTANT_PRODUCT, ActionSpec, Venue, WorldState, make_action

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def cp(vid, a, ra, b, rb, fee=(997, 1000)):
    return Venue(vid, CONSTANT_PRODUCT, {a: ra, b: rb}, fee=fee)


def world(venues, balances=None, height=0):
    return WorldState(height, balances or {"ETH": 1000.0}, {v.venue_id: v for v in venues})


def graph_from_weights(weights: dict) -> MarketGraph:
    """A MarketGraph straight from {(src, dst): weight}; actions are placeholders."""
    edges = []
    for (u, v), w in sorted(weights.items()):
        a = ActionSpec(f"m{u}{v}:{u}->{v}", f"m{u}{v}", u, v,
                       frozenset({("trader", u), ("trader", v)}))
        edges.append(Edge(u, v, a, w))
    nodes = tuple(sorted({u for u, _ in weights} | {v for _, v in weights}))
    return MarketGraph(nodes, tuple(edges), 0)


def index(catalog):
    return {a.action_id: a for a in catalog}


@pytest.fixture
def triangle():
    """ETH -> A -> B -> ETH through three fee-free pools with a 10% mispricing."""
    venues = [cp("p1", "ETH", 100.0, "A", 100.0, fee=(1, 1)),
              cp("p2", "A", 100.0, "B", 110.0, fee=(1, 1)),
              cp("p3", "B", 100.0, "ETH", 100.0, fee=(1, 1))]
    s = world(venues)
    path = [make_action(venues[0], "ETH"), make_action(venues[1], "A"), make_action(venues[2], "B")]
    return s, path


def rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


# --- optimizer oracles --------------------------------------------------------

def grid_max(pools, cap, n=1_000_001):
    """Max revenue of a chained constant-product path over a uniform grid.

    A ``None`` pool is a 1:1 converter.
    """
    x = np.linspace(0.0, cap, n)
    amt = x.copy()
    for pool in pools:
        if pool is None:
            continue
        r_in, r_out, fee = pool
        amt = r_out * amt * fee / (r_in + amt * fee)
    return float((amt - x).max())


def random_cycle(rng):
    depth = 10 ** rng.uniform(2, 4)
    edge = rng.uniform(1.05, 1.3)
    raw = [(depth, depth * rng.uniform(0.5, 2.0)), None, None]
    raw[1] = (raw[0][1] * rng.uniform(0.5, 2), None)
    mid = raw[1][0]
    raw[1] = (mid, mid * rng.uniform(0.5, 2.0))
    # close the loop with a price that beats the round trip by ``edge``
    price_in = (raw[0][1] / raw[0][0]) * (raw[1][1] / raw[1][0])
    back_depth = raw[1][1]
    raw[2] = (back_depth, back_depth / price_in * edge)
    fees = [0.997, 0.997, 0.997]
    assets = ["ETH", "A", "B", "ETH"]
    venues = [cp(f"p{i}", assets[i], r_in, assets[i + 1], r_out)
              for i, (r_in, r_out) in enumerate(raw)]
    s = world(venues, {"ETH": 3 * depth})
    path = [make_action(v, assets[i]) for i, v in enumerate(venues)]
    pools = [(r_in, r_out, f) for (r_in, r_out), f in zip(raw, fees)]
    return s, path, pools


# --- acceptance report ---------------------------------------------------------

_ACCEPTANCE = []


@pytest.fixture
def acceptance_log():
    """Collects one PASS/FAIL line per criterion for the terminal summary."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)


__all__ = ["cp", "world", "graph_from_weights", "index", "rel", "math", "grid_max", "random_cycle"]
