"""Per-path revenue maximisation by bracketing a revenue target.

``is_sat`` plays the part of the solver query "can this path earn at least
Z?": it searches the path's parameters by forward simulation and returns a
witness. ``optimize_revenue`` grows the target tenfold while satisfiable and
then bisects, keeping every (lower, upper) pair.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .arbitrage import X_MIN, golden_section, ramp_and_refine
from .errors import DefiError, NoProfitablePath
from .market import ActionSpec, Strategy, WorldState, check_restored, execute, segment_starts

RTOL = 1e-3
MIN_TARGET = 0.1
SWEEPS = 3
GRID = 32  # log-spaced probes for entry amounts of non-cyclic segments


@dataclass(frozen=True)
class FeasibilityQuery:
    path: tuple
    initial_state: WorldState
    target_revenue: float
    base: str = "ETH"
    free_params: bool = False

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(self.path))
        if not self.target_revenue > 0:
            raise ValueError("target_revenue must be > 0")


@dataclass
class Witness:
    params: list
    revenue: float


@dataclass
class OptimizerResult:
    revenue: float
    params: list
    sat_probes: int = 0
    bounds_history: list = field(default_factory=list)  # nested (lo, hi), from the first UNSAT hi
    growth_history: list = field(default_factory=list)


class _Hit(Exception):
    def __init__(self, w):
        self.w = w


def _touched(path) -> set:
    return {a.input_asset for a in path} | {a.output_asset for a in path if a.returns}


def _roles(path, free, base):
    """Per action: how its input amount is set.

    ``amount``: free absolute entry; ``share``: free fraction of the current
    holding; ``chain``: everything the previous action returned; ``sweep``:
    everything acquired of a non-base asset since the start (its last
    consumer must leave the starting balance intact).
    """
    starts = segment_starts(path)
    last_use = {a.input_asset: i for i, a in enumerate(path)}
    roles = []
    for i, (a, start) in enumerate(zip(path, starts)):
        last = last_use[a.input_asset] == i
        if start:
            roles.append("sweep" if last and a.input_asset != base and i > 0 else "amount")
        elif free and not last:
            roles.append("share")
        else:
            roles.append("chain")
    return roles


def _run(state, path, roles, values):
    """Params and state trace of the path under one parameter vector."""
    it = iter(values)
    trace = [state]
    params = []
    received = 0.0
    for a, role in zip(path, roles):
        cur = trace[-1]
        if role == "amount":
            x = float(next(it))
        elif role == "share":
            x = float(next(it)) * cur.balance(a.input_asset)
        elif role == "sweep":
            x = max(cur.balance(a.input_asset) - state.balance(a.input_asset), 0.0)
        else:
            x = received
        nxt = _apply(cur, a, x)
        if a.returns:
            received = nxt.balance(a.output_asset) - cur.balance(a.output_asset)
        params.append(x)
        trace.append(nxt)
    return params, trace


def _apply(state, action, x):
    from .market import apply_action

    return apply_action(state, action, x)


def _layout(path, free, base="ETH"):
    """Roles plus the kind of each free variable (``amount`` or ``share``)."""
    roles = _roles(path, free, base)
    return roles, [r for r in roles if r in ("amount", "share")]


def make_objective(state: WorldState, path: Sequence[ActionSpec], base: str = "ETH",
                   free: bool = False):
    """``f(values) -> (revenue, params)``; infeasible points score -inf."""
    path = tuple(path)
    roles, _ = _layout(path, free, base)
    touched = _touched(path)
    b0 = state.balance(base)

    def f(values):
        try:
            params, trace = _run(state, path, roles, values)
            check_restored(trace, base, touched)
        except DefiError:
            return -math.inf, None
        return trace[-1].balance(base) - b0, params

    return f


def _search(state, path, base, free, stop=None):
    """Maximise revenue over the path's variables; best (revenue, params).

    A single entry amount is sized by ramp + golden section. With several
    variables the first is scanned on a log grid (revenue need not be
    unimodal there, e.g. a loss-making short that enables a later cycle) and
    the rest are optimised for each probe; ``free`` mode then runs a few
    coordinate sweeps.
    """
    path = tuple(path)
    roles, kinds = _layout(path, free, base)
    f = make_objective(state, path, base, free)
    best = [-math.inf, None]

    def record(values):
        rev, params = f(values)
        if rev > best[0]:
            best[0], best[1] = rev, params
        if stop is not None and rev >= stop:
            raise _Hit(Witness(params, rev))
        return rev

    cap = state.balance(path[0].input_asset)
    if not kinds:
        record([])
        return best
    if len(kinds) == 1:
        ramp_and_refine(lambda x: record([x]), cap)
        return best

    def inner(prefix):
        # best over the remaining variables given fixed leading ones
        j = len(prefix)
        if j == len(kinds) - 1:
            hi = 1.0 if kinds[j] == "share" else _holding_cap(state, path, roles, prefix)
            x, fx = ramp_and_refine(lambda x: record(prefix + [x]), hi,
                                    x_min=min(X_MIN, hi))
            return fx, prefix + [x]
        return _scan(lambda v: inner(prefix + [v]), kinds[j], cap)

    if free:
        _, values = inner([])
        for _ in range(SWEEPS):
            for j, kind in enumerate(kinds):
                hi = 1.0 if kind == "share" else cap
                def g(v, j=j):
                    trial = list(values)
                    trial[j] = v
                    return record(trial)
                x, _ = golden_section(g, 0.0, hi)
                if g(x) >= record(values):
                    values[j] = x
    else:
        inner([])
    return best


def _holding_cap(state, path, roles, prefix):
    # the last free amount can use whatever the trader still holds after
    # the earlier free amounts of the same asset
    free_at = [i for i, r in enumerate(roles) if r in ("amount", "share")]
    asset = path[free_at[len(prefix)]].input_asset
    spent = sum(v for v, i in zip(prefix, free_at)
                if roles[i] == "amount" and path[i].input_asset == asset)
    return max(state.balance(asset) - spent, 0.0)


def _scan(h, kind, cap):
    """Log-grid scan of ``h(v) -> (score, values)`` then golden refinement."""
    hi = 1.0 if kind == "share" else cap
    if hi <= 0:
        return h(0.0)
    grid = np.concatenate([[0.0], np.geomspace(min(X_MIN, hi), hi, GRID)])
    scored = [(h(float(v))[0], i) for i, v in enumerate(grid)]
    _, i = max(scored)
    lo, up = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    x, _ = golden_section(lambda v: h(v)[0], float(lo), float(up), rtol=1e-6)
    return h(x)


def is_sat(q: FeasibilityQuery) -> Witness | None:
    """A parameter witness earning at least ``q.target_revenue``, or None."""
    if not math.isfinite(q.target_revenue):
        return None
    try:
        rev, params = _search(q.initial_state, q.path, q.base, q.free_params,
                              stop=q.target_revenue)
    except _Hit as hit:
        return hit.w
    if params is not None and rev >= q.target_revenue:
        return Witness(params, rev)
    return None


def optimize_revenue(path, state: WorldState, min_target: float = MIN_TARGET, base: str = "ETH",
                     rtol: float = RTOL, free_params: bool = False) -> OptimizerResult | None:
    """Coarse tenfold growth of the revenue target, then bisection.

    Returns None when even ``min_target`` is out of reach. The reported
    revenue is that of the best witness, which is the final lower bound.
    """
    if not min_target > 0:
        raise ValueError("min_target must be > 0")
    probes = 0

    def sat(z):
        nonlocal probes
        probes += 1
        return is_sat(FeasibilityQuery(tuple(path), state, z, base, free_params))

    w = sat(min_target)
    if w is None:
        return None
    best = w
    lo, hi = w.revenue, max(w.revenue, min_target) * 10
    growth = [(lo, hi)]
    while True:
        w = sat(hi)
        if w is None:
            break
        best = w
        lo = w.revenue
        hi = lo * 10
        growth.append((lo, hi))
    history = [(lo, hi)]
    while hi - lo > rtol * hi:
        mid = (lo + hi) / 2
        w = sat(mid)
        if w is None:
            hi = mid
        else:
            best = w
            lo = min(w.revenue, hi)
        history.append((lo, hi))
    return OptimizerResult(best.revenue, list(best.params), probes, history, growth)


def _evaluate(args):
    path, state, min_target, base, free = args
    return optimize_revenue(path, state, min_target, base, free_params=free)


def rank_paths(paths, state: WorldState, catalog=None, min_target: float = MIN_TARGET,
               base: str = "ETH", jobs: int = 1, free_params: bool = False) -> Strategy:
    """Optimise every path from the same state and return the best strategy.

    Paths may be ActionSpec sequences or action-id sequences (then
    ``catalog`` resolves them). Ties go to the shorter path, then to the
    lexicographically smaller id sequence.
    """
    index = None
    if catalog is not None:
        index = catalog if isinstance(catalog, dict) else {a.action_id: a for a in catalog}
    resolved = [tuple(index[p] if isinstance(p, str) else p for p in path) for path in paths]
    if not resolved:
        raise NoProfitablePath("no candidate paths")
    tasks = [(p, state, min_target, base, free_params) for p in resolved]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_evaluate, tasks))
    else:
        results = [_evaluate(t) for t in tasks]
    scored = []
    for p, r in zip(resolved, results):
        if r is not None:
            ids = tuple(a.action_id for a in p)
            scored.append((-round(r.revenue, 12), len(p), ids, p, r))
    if not scored:
        raise NoProfitablePath(f"none of {len(resolved)} paths reaches {min_target}")
    _, _, _, p, r = min(scored, key=lambda t: t[:3])
    return Strategy(p, r.params, state, r.revenue, base)


def replay_revenue(state: WorldState, path, params, base: str = "ETH") -> float:
    trace = execute(state, path, params)
    check_restored(trace, base, _touched(path))
    return trace[-1].balance(base) - state.balance(base)
