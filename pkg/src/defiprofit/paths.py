"""Candidate path enumeration with the seven pruning heuristics.

Asset-flow rules (H6 branching, H7 loops) look at the directed multigraph
with one edge ``input -> output`` per returning action of the path. An
accepted path is therefore a single chain leaving the base asset, visiting
distinct assets and coming back once.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .errors import CombinatorialBudgetExceeded, UnknownAction
from .market import ActionSpec

EXPANSION_CAP = 10**8

REASONS = {
    1: "path has a single action",
    2: "does not start by spending the base asset",
    3: "does not end by receiving the base asset",
    4: "action independent of every earlier action",
    5: "action immediately reversed on the same venue",
    6: "asset flow branches",
    7: "asset flow contains a loop",
}


@dataclass(frozen=True)
class HeuristicReport:
    path: tuple[str, ...]
    rejected_by: int | None = None

    @property
    def accepted(self) -> bool:
        return self.rejected_by is None

    @property
    def verdict(self) -> str:
        return "accepted" if self.accepted else f"rejected(H{self.rejected_by})"

    @property
    def rejected_reason(self) -> str:
        return "" if self.accepted else REASONS[self.rejected_by]


@dataclass
class PruneStats:
    # length -> [before, after]
    counts: dict = field(default_factory=dict)
    expansions: int = 0

    def before(self, k: int) -> int:
        return self.counts[k][0]

    def after(self, k: int) -> int:
        return self.counts[k][1]

    @property
    def total_after(self) -> int:
        return sum(a for _, a in self.counts.values())

    def rows(self):
        return [(k, b, a) for k, (b, a) in sorted(self.counts.items())]


def actions_independent(a: ActionSpec, b: ActionSpec) -> bool:
    return not (a.storage_keys & b.storage_keys)


def _index(catalog) -> dict[str, ActionSpec]:
    if isinstance(catalog, dict):
        return dict(catalog)
    return {a.action_id: a for a in catalog}


def _resolve(path, index) -> list[ActionSpec]:
    out = []
    for p in path:
        aid = p.action_id if isinstance(p, ActionSpec) else p
        if aid not in index:
            raise UnknownAction(f"action {aid!r} not in catalog")
        out.append(index[aid])
    return out


def _reverses(a: ActionSpec, b: ActionSpec) -> bool:
    return (a.venue == b.venue and a.returns and b.returns
            and a.input_asset == b.output_asset and a.output_asset == b.input_asset)


def _reaches(adj: dict, src: str, dst: str) -> bool:
    stack, seen = [src], {src}
    while stack:
        u = stack.pop()
        if u == dst:
            return True
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return False


class _Flow:
    """Incremental view of a path prefix used by both the checker and the DFS."""

    __slots__ = ("base", "keys", "outdeg", "indeg", "produced", "adj", "last",
                 "h4", "h5", "branch", "loop")

    def __init__(self, base):
        self.base = base
        self.keys = frozenset()
        self.outdeg: dict = {}
        self.indeg: dict = {}
        self.produced: frozenset = frozenset()
        self.adj: dict = {}
        self.last = None
        self.h4 = self.h5 = self.branch = self.loop = False

    def push(self, a: ActionSpec) -> "_Flow":
        f = _Flow.__new__(_Flow)
        f.base = self.base
        first = self.last is None
        f.h4 = self.h4 or (not first and a.input_asset != self.base
                           and not (a.storage_keys & self.keys))
        f.h5 = self.h5 or (not first and _reverses(self.last, a))
        branch = self.branch or (a.input_asset != self.base and a.input_asset not in self.produced)
        loop = self.loop
        f.outdeg, f.indeg, f.adj, f.produced = self.outdeg, self.indeg, self.adj, self.produced
        if a.returns:
            u, v = a.input_asset, a.output_asset
            f.outdeg = {**self.outdeg, u: self.outdeg.get(u, 0) + 1}
            f.indeg = {**self.indeg, v: self.indeg.get(v, 0) + 1}
            branch = branch or f.outdeg[u] > 1 or f.indeg[v] > 1
            if u != self.base and v != self.base:
                loop = loop or _reaches(self.adj, v, u)
                f.adj = {**self.adj, u: self.adj.get(u, ()) + (v,)}
            f.produced = self.produced | {v}
        f.branch, f.loop = branch, loop
        f.keys = self.keys | a.storage_keys
        f.last = a
        return f

    @property
    def dead(self) -> bool:
        """No extension of this prefix can be accepted."""
        return self.h4 or self.h5 or self.branch or self.loop


def _verdict(actions: Sequence[ActionSpec], base: str) -> int | None:
    if len(actions) <= 1:
        return 1
    if actions[0].input_asset != base:
        return 2
    if actions[-1].output_asset != base:
        return 3
    flow = _Flow(base)
    for a in actions:
        flow = flow.push(a)
    if flow.h4:
        return 4
    if flow.h5:
        return 5
    if flow.loop:
        return 7
    if flow.branch:
        return 6
    return None


def check_heuristics(path, base: str, catalog) -> HeuristicReport:
    """Apply H1..H7 in order; the report names the first one that fails.

    A loop in the non-base asset flow is attributed to H7 even though it
    usually also creates a branch point.
    """
    actions = _resolve(path, _index(catalog))
    ids = tuple(a.action_id for a in actions)
    if len(set(ids)) != len(ids):
        raise ValueError("path repeats an action")
    return HeuristicReport(ids, _verdict(actions, base))


def _dfs(actions, base, max_len, prefix, flow, found, budget):
    for a in actions:
        if a in prefix:
            continue
        budget[0] += 1
        if budget[0] > budget[1]:
            raise CombinatorialBudgetExceeded(f"more than {budget[1]} prefix expansions")
        nxt = flow.push(a)
        if nxt.dead:
            continue
        path = prefix + (a,)
        if len(path) >= 2 and a.output_asset == base:
            found.append(tuple(x.action_id for x in path))
        if len(path) < max_len:
            _dfs(actions, base, max_len, path, nxt, found, budget)


def _shard(args):
    actions, base, max_len, first, cap = args
    found: list = []
    budget = [0, cap]
    flow = _Flow(base).push(first)
    if not flow.dead and max_len > 1:
        _dfs(actions, base, max_len, (first,), flow, found, budget)
    return found, budget[0]


def enumerate_pruned(catalog, base: str, max_len: int, cap: int = EXPANSION_CAP, jobs: int = 1):
    """Accepted paths of length 2..max_len plus per-length before/after counts.

    ``before`` is the number of ordered, non-repeating action sequences of
    each length; ``after`` counts accepted paths. Prefixes that already
    violate H2, H4, H5 or the flow rules are not extended. Work is sharded by
    first action; ``jobs > 1`` runs shards in worker processes.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    actions = sorted(_index(catalog).values(), key=lambda a: a.action_id)
    n = len(actions)
    starts = [a for a in actions if a.input_asset == base]
    tasks = [(actions, base, max_len, a, cap) for a in starts]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_shard, tasks))
    else:
        results = [_shard(t) for t in tasks]
    paths = [p for found, _ in results for p in found]
    stats = PruneStats(expansions=n + sum(e for _, e in results))
    if stats.expansions > cap:
        raise CombinatorialBudgetExceeded(f"{stats.expansions} prefix expansions exceed cap {cap}")
    paths.sort(key=lambda p: (len(p), p))
    for k in range(1, max_len + 1):
        stats.counts[k] = [math.perm(n, k), sum(1 for p in paths if len(p) == k)]
    return paths, stats
