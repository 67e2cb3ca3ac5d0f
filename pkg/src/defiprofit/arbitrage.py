"""Negative-cycle arbitrage over the -log(price) market graph.

The loop is greedy: find one negative cycle, route it through the base asset,
size the entry amount, execute, rebuild the graph from the new state.
"""
from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import DefiError, NoProfit, NoRoute
from .market import ActionSpec, Strategy, WorldState, chain, spot_price

log = logging.getLogger(__name__)

X_MIN = 1e-6
MAX_CYCLES = 50
GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    action: ActionSpec
    weight: float

    @property
    def venue(self) -> str:
        return self.action.venue

    @property
    def price(self) -> float:
        return math.exp(-self.weight)


@dataclass(frozen=True)
class MarketGraph:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    built_at: int

    def edge(self, src: str, dst: str) -> Edge | None:
        for e in self.edges:
            if e.src == src and e.dst == dst:
                return e
        return None

    def weights(self) -> dict:
        return {(e.src, e.dst): e.weight for e in self.edges}


@dataclass(frozen=True)
class NegCycle:
    assets: tuple[str, ...]
    edges: tuple[Edge, ...]
    weight_sum: float

    @property
    def venues(self) -> tuple[str, ...]:
        return tuple(e.venue for e in self.edges)

    @property
    def price_product(self) -> float:
        return math.prod(e.price for e in self.edges)


def _catalog_actions(catalog) -> list[ActionSpec]:
    if isinstance(catalog, dict):
        return list(catalog.values())
    return list(catalog)


def build_graph(state: WorldState, catalog, exclude: Iterable[str] = ()) -> MarketGraph:
    """One edge per directed asset pair, priced by the best live venue.

    Actions without an output asset and venues holding an empty reserve are
    skipped; ``exclude`` lists action ids to leave out.
    """
    excluded = set(exclude)
    best: dict[tuple[str, str], tuple[float, ActionSpec]] = {}
    for action in sorted(_catalog_actions(catalog), key=lambda a: a.action_id):
        if not action.returns or action.action_id in excluded:
            continue
        venue = state.venues.get(action.venue)
        if venue is None or not venue.is_live:
            continue
        price = spot_price(venue, action.input_asset)
        pair = (action.input_asset, action.output_asset)
        if pair not in best or price > best[pair][0]:
            best[pair] = (price, action)
    edges = tuple(Edge(a.input_asset, a.output_asset, a, -math.log(p))
                  for (_, _), (p, a) in sorted(best.items()))
    nodes = tuple(sorted({e.src for e in edges} | {e.dst for e in edges}))
    return MarketGraph(nodes, edges, state.block_height)


def find_negative_cycle(g: MarketGraph, tol: float = 0.0) -> NegCycle | None:
    """Queue-based Bellman-Ford-Moore with a walk to the root on relaxation.

    Every node starts at distance 0 (a virtual root joined to all of them)
    and is scanned in FIFO order. Before relaxing ``u -> v`` the parent chain
    of ``u`` is walked; meeting ``v`` there closes a cycle of the parent
    graph, which is returned. Edge weights are inflated by ``tol / |N|``, so
    any cycle with weight sum below ``-tol`` is found and none with a sum of
    zero or more is reported.
    """
    n = len(g.nodes)
    if n == 0:
        return None
    bump = tol / n
    out: dict[str, list[Edge]] = {v: [] for v in g.nodes}
    for e in g.edges:
        out[e.src].append(e)
    dist = {v: 0.0 for v in g.nodes}
    parent: dict[str, Edge | None] = {v: None for v in g.nodes}
    queue = deque(g.nodes)
    queued = set(g.nodes)
    while queue:
        u = queue.popleft()
        queued.discard(u)
        for e in out[u]:
            v = e.dst
            cand = dist[u] + e.weight + bump
            if not cand < dist[v]:
                continue
            cyc = _walk_to_root(u, e, parent)
            if cyc is not None:
                if cyc.weight_sum + bump * len(cyc.edges) < 0:
                    return cyc
                continue  # rounding noise on a zero-weight loop
            dist[v] = cand
            parent[v] = e
            if v not in queued:
                queue.append(v)
                queued.add(v)
    return None


def _walk_to_root(u: str, e: Edge, parent) -> NegCycle | None:
    """Cycle closed by setting parent[e.dst] = e, if e.dst is an ancestor of u."""
    chain = [e]
    x = u
    while x != e.dst:
        pe = parent[x]
        if pe is None:
            return None
        chain.append(pe)
        x = pe.src
    chain.reverse()
    assets = tuple(c.src for c in chain) + (chain[0].src,)
    return NegCycle(assets, tuple(chain), sum(c.weight for c in chain))


def _rotate(edges: Sequence[Edge], start: str) -> list[Edge]:
    i = [e.src for e in edges].index(start)
    return list(edges[i:]) + list(edges[:i])


def connect_to_base(cycle: NegCycle, g: MarketGraph, base: str) -> list[ActionSpec]:
    """Turn ``cycle`` into an executable path that starts and ends at ``base``.

    When the base asset sits off the cycle, every (entry, exit) pair of cycle
    assets with connecting markets is tried and the one with the largest
    round-trip spot product wins. Entry == exit runs the whole cycle.
    """
    if base in cycle.assets:
        return [e.action for e in _rotate(cycle.edges, base)]
    best = None
    k = len(cycle.edges)
    for i, entry_edge in enumerate(cycle.edges):
        entry = entry_edge.src
        into = g.edge(base, entry)
        if into is None:
            continue
        ring = _rotate(cycle.edges, entry)
        for j in range(k):
            # j == 0: full loop back to entry, else stop after j hops
            hops = ring if j == 0 else ring[:j]
            exit_asset = hops[-1].dst
            out = g.edge(exit_asset, base)
            if out is None:
                continue
            weight = into.weight + sum(e.weight for e in hops) + out.weight
            key = (weight, len(hops), entry, exit_asset)
            if best is None or key < best[0]:
                best = (key, [into, *hops, out])
    if best is None:
        raise NoRoute(f"{base} cannot reach cycle {cycle.assets}")
    return [e.action for e in best[1]]


def golden_section(f, a: float, b: float, rtol: float = 1e-10, max_iter: int = 200):
    """Maximise a unimodal ``f`` on [a, b]; returns (x, f(x))."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= rtol * max(abs(b), 1e-300):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def path_revenue(state: WorldState, path: Sequence[ActionSpec], entries, base: str):
    """Revenue of the chained path, or -inf when it cannot execute.

    Returns ``(revenue, params, final_state)``.
    """
    from .market import check_restored

    try:
        params, trace = chain(state, path, entries)
        touched = {a.input_asset for a in path} | {a.output_asset for a in path if a.returns}
        check_restored(trace, base, touched)
    except DefiError:
        return -math.inf, None, None
    return trace[-1].balance(base) - state.balance(base), params, trace[-1]


def ramp_and_refine(f, cap: float, x_min: float = X_MIN, stop=None):
    """Double ``x`` from ``x_min`` until ``f`` falls, then golden-section.

    ``stop(x, fx)`` may end the search early (used by feasibility probes).
    Returns the best ``(x, f(x))`` seen.
    """
    if cap <= 0:
        return 0.0, f(0.0)
    xs, fs = [0.0], [f(0.0)]
    x = min(x_min, cap)
    while True:
        fx = f(x)
        xs.append(x)
        fs.append(fx)
        if stop is not None and stop(x, fx):
            return x, fx
        if fx < fs[-2] or x >= cap:
            break
        x = min(2 * x, cap)
    i = max(range(len(fs)), key=fs.__getitem__)
    lo = xs[max(i - 1, 0)]
    hi = xs[min(i + 1, len(xs) - 1)]
    if hi <= lo:
        return xs[i], fs[i]
    if stop is None:
        x, fx = golden_section(f, lo, hi)
    else:
        x, fx = _golden_with_stop(f, lo, hi, stop)
    return (x, fx) if fx >= fs[i] else (xs[i], fs[i])


def _golden_with_stop(f, a, b, stop):
    def g(x):
        fx = f(x)
        if stop(x, fx):
            raise _Found(x, fx)
        return fx

    try:
        return golden_section(g, a, b)
    except _Found as hit:
        return hit.x, hit.fx


class _Found(Exception):
    def __init__(self, x, fx):
        self.x, self.fx = x, fx


def greedy_param_search(state: WorldState, path: Sequence[ActionSpec], base: str = "ETH",
                        x_min: float = X_MIN):
    """Size the single entry amount of a chained path.

    Returns ``(revenue, params, final_state)``; raises NoProfit when no
    sampled amount yields positive revenue.
    """
    cap = state.balance(path[0].input_asset)

    def f(x):
        return path_revenue(state, path, [x], base)[0]

    x, rev = ramp_and_refine(f, cap, x_min)
    if not rev > 0:
        raise NoProfit("no positive revenue along path " + " ".join(a.action_id for a in path))
    _, params, final = path_revenue(state, path, [x], base)
    return rev, params, final


@dataclass
class ArbResult:
    strategies: list[Strategy] = field(default_factory=list)
    below_threshold: list[Strategy] = field(default_factory=list)
    total_revenue: float = 0.0
    rounds: int = 0
    cap_hit: bool = False
    final_state: WorldState | None = None
    timings: dict = field(default_factory=lambda: {"graph": 0.0, "cycle": 0.0, "search": 0.0})


CYCLE_TOL = 1e-6


def run_arb(state: WorldState, catalog, base: str = "ETH", min_revenue: float = 0.1,
            max_cycles: int = MAX_CYCLES, cycle_tol: float = CYCLE_TOL) -> ArbResult:
    """Greedy negative-cycle extraction loop.

    Every profitable strategy found is executed and the state moves on, but
    only those beating ``min_revenue`` are committed and counted; the rest
    land in ``below_threshold``. A cycle that cannot be traded at a profit
    from ``base`` gets one of its edges masked for the rest of the run.
    Cycles with a weight sum above ``-cycle_tol`` count as exhausted.
    """
    result = ArbResult()
    masked: set[str] = set()
    clock = time.perf_counter
    for _ in range(max_cycles):
        t0 = clock()
        g = build_graph(state, catalog, masked)
        t1 = clock()
        cycle = find_negative_cycle(g, cycle_tol)
        t2 = clock()
        result.timings["graph"] += t1 - t0
        result.timings["cycle"] += t2 - t1
        if cycle is None:
            break
        result.rounds += 1
        try:
            path = connect_to_base(cycle, g, base)
            revenue, params, final = greedy_param_search(state, path, base)
        except (NoRoute, NoProfit):
            # first edge after the smallest asset: any fixed choice breaks the loop
            edge = min(cycle.edges, key=lambda e: (e.src, e.dst))
            masked.add(edge.action.action_id)
            result.timings["search"] += clock() - t2
            continue
        result.timings["search"] += clock() - t2
        strategy = Strategy(tuple(path), tuple(params), state, revenue, base)
        if revenue > min_revenue:
            result.strategies.append(strategy)
            result.total_revenue += revenue
        else:
            result.below_threshold.append(strategy)
        state = final
    else:
        if find_negative_cycle(build_graph(state, catalog, masked), cycle_tol) is not None:
            result.cap_hit = True
            log.warning("run_arb: iteration cap %d reached with cycles left", max_cycles)
    result.final_state = state
    return result
