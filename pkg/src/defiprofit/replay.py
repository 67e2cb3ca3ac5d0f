"""Block-by-block replay with dependency-based skipping and cost accounting.

A path is only searched again at block ``h`` when one of its storage keys
differs from block ``h - 1``; the graph search reruns when any key of the
catalog moved. Every candidate is re-executed on the block's snapshot
before it is committed, and gas plus a flat flash-loan fee are netted out.
Found strategies are not written back into later snapshots: each snapshot
is the chain as observed.
"""
from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import snapshot
from .arbitrage import run_arb
from .errors import DefiError, MissingBlock
from .market import ActionSpec, Strategy, WorldState, strategy_revenue
from .optimizer import MIN_TARGET, optimize_revenue
from .paths import enumerate_pruned

log = logging.getLogger(__name__)

GAS_PER_ACTION = 150_000
CSV_COLUMNS = ("block", "mode", "path", "revenue", "cost", "net",
               "ms_prune", "ms_search", "ms_validate")


class BlockSeries:
    """Snapshots ordered by strictly increasing block height."""

    def __init__(self, states: Sequence[WorldState]):
        states = list(states)
        heights = [s.block_height for s in states]
        if any(b <= a for a, b in zip(heights, heights[1:])):
            raise ValueError("block heights must be strictly increasing")
        self.states = tuple(states)
        self._by_height = {s.block_height: s for s in states}

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __contains__(self, h):
        return h in self._by_height

    def __getitem__(self, h: int) -> WorldState:
        try:
            return self._by_height[h]
        except KeyError:
            raise MissingBlock(f"block {h} not in series") from None

    @property
    def heights(self) -> list[int]:
        return [s.block_height for s in self.states]


def save_series(series: BlockSeries, directory) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    out = []
    for s in series:
        p = d / f"block_{s.block_height}.json"
        snapshot.save_snapshot(s, p)
        out.append(p)
    return out


def load_series(directory) -> BlockSeries:
    files = sorted(Path(directory).glob("*.json"))
    if not files:
        raise FileNotFoundError(f"no snapshot files in {directory}")
    states = sorted((snapshot.load_snapshot(f) for f in files), key=lambda s: s.block_height)
    return BlockSeries(states)


@dataclass(frozen=True)
class CostModel:
    gas_price: float = 32.0            # GWei
    gas_per_action: int = GAS_PER_ACTION
    flash_loan_fee: float = 0.0        # base units per strategy

    def __post_init__(self):
        if min(self.gas_price, self.gas_per_action, self.flash_loan_fee) < 0:
            raise ValueError("cost parameters must be >= 0")

    def cost(self, n_actions: int) -> float:
        return self.gas_price * 1e-9 * self.gas_per_action * n_actions + self.flash_loan_fee


def _keys(path) -> set:
    return set().union(*(a.storage_keys for a in path)) if path else set()


def keys_changed(keys, before: WorldState, after: WorldState) -> bool:
    return any(before.read(k) != after.read(k) for k in keys)


def state_changed(path: Sequence[ActionSpec], series: BlockSeries, h: int) -> bool:
    """Did any storage key read or written by ``path`` move from ``h - 1`` to ``h``?"""
    return keys_changed(_keys(path), series[h - 1], series[h])


@dataclass
class ReplayRow:
    block: int
    mode: str
    path: str
    revenue: float
    cost: float
    net: float
    ms_prune: float
    ms_search: float
    ms_validate: float


@dataclass
class ReplayReport:
    mode: str
    rows: list = field(default_factory=list)
    committed: list = field(default_factory=list)     # (block, Strategy, cost)
    discovery_calls: int = 0
    changed_pairs: int = 0
    validation_failures: int = 0
    errors: list = field(default_factory=list)        # (block, message)
    heights: list = field(default_factory=list)

    @property
    def gross(self) -> float:
        return sum(s.revenue for _, s, _ in self.committed)

    @property
    def net(self) -> float:
        return sum(s.revenue - c for _, s, c in self.committed)

    def per_block(self, net: bool = False) -> np.ndarray:
        """Committed revenue per block of the series (gross unless ``net``)."""
        pos = {h: i for i, h in enumerate(self.heights)}
        out = np.zeros(len(self.heights))
        for h, s, c in self.committed:
            out[pos[h]] += s.revenue - c if net else s.revenue
        return out

    def cumulative(self, net: bool = False) -> np.ndarray:
        return np.cumsum(self.per_block(net))

    def to_csv(self, fh=None, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            ms = (r.ms_prune, r.ms_search, r.ms_validate) if timing else (0.0, 0.0, 0.0)
            w.writerow([r.block, r.mode, r.path, repr(r.revenue), repr(r.cost), repr(r.net),
                        *(f"{m:.3f}" for m in ms)])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def _optimize(args):
    path, state, min_revenue, base, free = args
    return optimize_revenue(path, state, min_revenue, base, free_params=free)


def replay(series: BlockSeries, discovery: str = "search", cost: CostModel | None = None,
           min_revenue: float = MIN_TARGET, catalog=None, paths=None, base: str = "ETH",
           max_len: int = 4, jobs: int = 1, free_params: bool = False) -> ReplayReport:
    """Run discovery over the series, skipping blocks whose relevant state is unchanged.

    ``discovery`` is ``"search"`` (optimise each candidate path, commit the
    best one per block) or ``"arb"`` (negative-cycle loop on the catalog).
    Search mode takes ``paths`` as action-id tuples, or enumerates them once
    from ``catalog`` up to ``max_len`` actions. A candidate is committed only
    if its re-executed revenue beats ``min_revenue`` and its cost.
    """
    if discovery not in ("search", "arb"):
        raise ValueError(f"unknown discovery mode {discovery!r}")
    if len(series) == 0:
        raise ValueError("empty series")
    if catalog is None:
        raise ValueError("a catalog is required")
    cost = cost or CostModel()
    index = catalog if isinstance(catalog, dict) else {a.action_id: a for a in catalog}
    report = ReplayReport(discovery, heights=series.heights)
    if discovery == "search":
        if paths is None:
            paths, _ = enumerate_pruned(index, base, max_len)
        resolved = [tuple(index[a] for a in p) for p in paths]
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        prev = None
        for state in series:
            h = state.block_height
            try:
                if discovery == "search":
                    _search_block(report, state, prev, resolved, cost, min_revenue, base,
                                  free_params, pool)
                else:
                    _arb_block(report, state, prev, index, cost, min_revenue, base)
            except DefiError as exc:
                log.warning("block %d: %s", h, exc)
                report.errors.append((h, str(exc)))
            prev = state
    finally:
        if pool is not None:
            pool.shutdown()
    return report


def _changed(path_keys, prev, state) -> bool:
    # the first block of a series has nothing to compare against
    return prev is None or keys_changed(path_keys, prev, state)


def _search_block(report, state, prev, paths, cost, min_revenue, base, free, pool):
    h = state.block_height
    clock = time.perf_counter
    t0 = clock()
    todo = [p for p in paths if _changed(_keys(p), prev, state)]
    t1 = clock()
    report.changed_pairs += len(todo)
    report.discovery_calls += len(todo)
    tasks = [(p, state, min_revenue, base, free) for p in todo]
    results = list(pool.map(_optimize, tasks)) if pool and len(tasks) > 1 else [_optimize(t) for t in tasks]
    t2 = clock()
    found = [(p, r) for p, r in zip(todo, results) if r is not None]
    best = None
    if found:
        # same ordering as rank_paths: revenue, then shorter, then ids
        p, r = min(found, key=lambda pr: (-round(pr[1].revenue, 12), len(pr[0]),
                                           tuple(a.action_id for a in pr[0])))
        best = Strategy(p, r.params, state, r.revenue, base)
    committed = _validate(report, h, [best] if best else [], cost, min_revenue, state)
    t3 = clock()
    _emit(report, h, "search", committed, (t1 - t0, t2 - t1, t3 - t2))


def _arb_block(report, state, prev, catalog, cost, min_revenue, base):
    h = state.block_height
    clock = time.perf_counter
    t0 = clock()
    changed = _changed(_keys(list(catalog.values())), prev, state)
    t1 = clock()
    strategies = []
    if changed:
        report.changed_pairs += 1
        report.discovery_calls += 1
        strategies = run_arb(state, catalog, base, min_revenue).strategies
    t2 = clock()
    # each committed cycle runs on the state left by the previous one
    committed = _validate(report, h, strategies, cost, min_revenue, None)
    t3 = clock()
    _emit(report, h, "arb", committed, (t1 - t0, t2 - t1, t3 - t2))


def _validate(report, h, strategies, cost, min_revenue, state):
    out = []
    for s in strategies:
        start = state if state is not None else s.initial_state
        try:
            revenue = strategy_revenue(start, s)
        except DefiError as exc:
            report.validation_failures += 1
            log.warning("block %d: validation failed: %s", h, exc)
            continue
        if abs(revenue - s.revenue) > 1e-6 * max(abs(s.revenue), 1.0):
            report.validation_failures += 1
            log.warning("block %d: replayed revenue %r differs from %r", h, revenue, s.revenue)
        c = cost.cost(len(s.path))
        if revenue > min_revenue and revenue - c > 0:
            out.append((Strategy(s.path, s.params, s.initial_state, revenue, s.base), c))
    return out


def _emit(report, h, mode, committed, secs):
    ms = [1000 * t for t in secs]
    if not committed:
        report.rows.append(ReplayRow(h, mode, "", 0.0, 0.0, 0.0, *ms))
    for s, c in committed:
        report.committed.append((h, s, c))
        report.rows.append(ReplayRow(h, mode, " ".join(s.action_ids), s.revenue, c,
                                     s.revenue - c, *ms))


# --- synthetic series ------------------------------------------------------

def make_series(state: WorldState, n_blocks: int = 100, n_touched: int = 30, seed: int = 0,
                touch_window: int | None = None, jitter: float = 0.005) -> tuple[BlockSeries, list[int]]:
    """``n_blocks`` consecutive snapshots starting at ``state``.

    ``n_touched`` block indices (always including 0) scale every venue's
    reserves by an independent lognormal factor; other blocks copy their
    predecessor. Touched indices are drawn from the first ``touch_window``
    blocks (default 80% of the series) so the series ends in a static run.
    Returns the series and the sorted touched indices.
    """
    if not 1 <= n_touched <= n_blocks:
        raise ValueError("need 1 <= n_touched <= n_blocks")
    window = touch_window or max(n_touched, int(0.8 * n_blocks))
    rng = np.random.default_rng(seed)
    rest = rng.choice(np.arange(1, window), size=n_touched - 1, replace=False)
    touched = sorted({0, *(int(i) for i in rest)})
    states = []
    cur = state
    h0 = state.block_height
    for i in range(n_blocks):
        if i in touched and i > 0:
            venues = {}
            for vid in sorted(cur.venues):
                v = cur.venues[vid]
                f = {a: r * float(np.exp(rng.normal(0, jitter))) for a, r in sorted(v.reserves.items())}
                venues[vid] = v.with_reserves(**f)
            cur = cur.evolve(venues=venues)
        cur = cur.evolve(block_height=h0 + i)
        states.append(cur)
    return BlockSeries(states), touched
