"""Fork-decision MDP: when does transaction value make forking pay?

States are (adversary chain length, honest chain length, fork flag). Every
step the adversary picks an action and then exactly one mining event
happens: the adversary finds a block (probability alpha), an honest miner
finds one that sticks ((1 - alpha)(1 - r_s)), or an honest block goes stale
and nothing changes ((1 - alpha) r_s). A mining cost ``c_m`` is paid every
step, so honest mining earns ``alpha - c_m`` per step.

Rewards count the adversary's own accepted blocks (in block-reward units)
plus the MEV claimed when it exits with a private chain that is long enough.
Exiting resets the process, so the long-run average reward compares forking
against mining honestly on equal terms.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np
from scipy import sparse

from .errors import InvalidSpec, NoConvergence

MAX_ITER = 1_000_000
TAU = 0.5          # aperiodicity transform weight
FORK_TOL = 1e-7    # gain above honest mining that counts as "forks"


class Fork(IntEnum):
    IRRELEVANT = 0   # last block was the adversary's
    RELEVANT = 1     # last block was honest; a match is possible
    ACTIVE = 2       # a match is running


class Action(IntEnum):
    ADOPT = 0
    OVERRIDE = 1
    MATCH = 2
    WAIT = 3
    EXIT = 4


@dataclass(frozen=True)
class MdpSpec:
    alpha: float
    gamma: float = 0.0
    r_s: float = 0.0
    k: int = 1
    omega: float = 0.0
    c_m: float | None = None     # None means c_m = alpha
    cutoff: int = 20
    mev_value: float = 0.0
    block_reward: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha < 0.5:
            raise InvalidSpec(f"alpha must be in (0, 0.5), got {self.alpha}")
        if not (0 <= self.gamma <= 1 and 0 <= self.omega <= 1):
            raise InvalidSpec("gamma and omega must be in [0, 1]")
        if not 0 <= self.r_s < 1:
            raise InvalidSpec(f"r_s must be in [0, 1), got {self.r_s}")
        if self.k < 0 or self.cutoff < self.k + 1:
            raise InvalidSpec("need k >= 0 and cutoff >= k + 1")
        if self.c_m is not None and self.c_m < 0:
            raise InvalidSpec("c_m must be >= 0")
        if not (math.isfinite(self.mev_value) and self.mev_value >= 0):
            raise InvalidSpec("mev_value must be finite and >= 0")
        if not self.block_reward > 0:
            raise InvalidSpec("block_reward must be > 0")

    @property
    def cost(self) -> float:
        return self.alpha if self.c_m is None else self.c_m

    @property
    def tie_share(self) -> float:
        # honest hash rate that builds on the adversary's branch during a
        # match; eclipsed miners (omega) are assumed to do so as well
        return self.gamma + self.omega * (1 - self.gamma)


@dataclass(frozen=True)
class MdpState:
    l_a: int
    l_h: int
    fork: Fork = Fork.IRRELEVANT
    terminal: bool = False


@dataclass
class MdpTables:
    spec: MdpSpec
    states: list
    P: list                       # per action: csr matrix (n x n)
    R: np.ndarray                 # (actions, n); -inf where unavailable
    index: dict = field(default_factory=dict)

    @property
    def allowed(self) -> np.ndarray:
        return np.isfinite(self.R)

    def state_id(self, l_a, l_h, fork=Fork.IRRELEVANT) -> int:
        return self.index[(l_a, l_h, Fork(fork))]

    def restrict(self, policy) -> "MdpTables":
        """Same chain with exactly one allowed action per state."""
        R = np.full_like(self.R, -np.inf)
        cols = np.arange(len(self.states))
        R[policy, cols] = self.R[policy, cols]
        return MdpTables(self.spec, self.states, self.P, R, self.index)


def build_mdp(spec: MdpSpec) -> MdpTables:
    c = spec.cutoff
    states = [MdpState(a, h, f) for a in range(c + 1) for h in range(c + 1) for f in Fork]
    index = {(s.l_a, s.l_h, s.fork): i for i, s in enumerate(states)}
    n = len(states)
    p_adv = spec.alpha
    p_hon = (1 - spec.alpha) * (1 - spec.r_s)
    p_stale = (1 - spec.alpha) * spec.r_s
    tie = spec.tie_share
    br = spec.block_reward
    rows = {a: ([], [], []) for a in Action}
    R = np.full((len(Action), n), -np.inf)

    def put(act, i, j, p):
        if p > 0:
            r, cl, v = rows[act]
            r.append(i)
            cl.append(j)
            v.append(p)

    def mine(act, i, a, h, fork, reward):
        """Action already resolved to (a, h, fork); now one mining event."""
        R[act, i] = reward - spec.cost * br
        put(act, i, index[(a + 1, h, Fork.IRRELEVANT if fork != Fork.ACTIVE else Fork.ACTIVE)],
            p_adv)
        if fork == Fork.ACTIVE and a >= h:
            # honest miners split between the two branches of the tie
            put(act, i, index[(a - h, 1, Fork.RELEVANT)], p_hon * tie)
            put(act, i, index[(a, h + 1, Fork.RELEVANT)], p_hon * (1 - tie))
            R[act, i] += p_hon * tie * h * br
        else:
            put(act, i, index[(a, h + 1, Fork.RELEVANT)], p_hon)
        put(act, i, index[(a, h, fork)], p_stale)

    for i, s in enumerate(states):
        a, h, f = s.l_a, s.l_h, s.fork
        mine(Action.ADOPT, i, 0, 0, Fork.IRRELEVANT, 0.0)
        if a > h:
            mine(Action.OVERRIDE, i, a - h - 1, 0, Fork.IRRELEVANT, (h + 1) * br)
        if a < c and h < c:
            if f == Fork.RELEVANT and a >= h >= 1:
                mine(Action.MATCH, i, a, h, Fork.ACTIVE, 0.0)
            mine(Action.WAIT, i, a, h, f, 0.0)
        if a > h and a > spec.k:
            mine(Action.EXIT, i, 0, 0, Fork.IRRELEVANT, spec.mev_value + a * br)
    P = [sparse.csr_matrix((v, (r, cl)), shape=(n, n)) for r, cl, v in (rows[a] for a in Action)]
    return MdpTables(spec, states, P, R, index)


def solve_policy(tables: MdpTables, horizon_epsilon: float = 1e-6, max_iter: int = MAX_ITER):
    """Relative value iteration for the average-reward criterion.

    Runs on the lazy chain ``(1 - TAU) I + TAU P`` so that periodic chains
    converge too; the gain is rescaled back. Stops when the span of the
    value update is at most ``horizon_epsilon``. Returns
    ``(policy, gain, bias)``; ties go to the lowest action number, so adopt
    beats waiting when the two are worth the same.
    """
    allowed = tables.allowed
    if not allowed.any(axis=0).all():
        raise InvalidSpec("some state has no available action")
    n = len(tables.states)
    R = np.where(allowed, tables.R * TAU, -np.inf)
    v = np.zeros(n)
    for _ in range(max_iter):
        q = R + np.stack([(1 - TAU) * v + TAU * (Pa @ v) for Pa in tables.P])
        nv = q.max(axis=0)
        d = nv - v
        span = d.max() - d.min()
        v = nv - nv[0]
        if span <= horizon_epsilon:
            break
    else:
        raise NoConvergence(f"span still above {horizon_epsilon} after {max_iter} sweeps")
    gain = (d.max() + d.min()) / 2 / TAU
    best = q.max(axis=0)
    scale = np.maximum(np.abs(best), 1.0)
    # lowest-numbered action within rounding of the best one
    policy = np.argmax(q >= best - 1e-9 * scale, axis=0)
    return policy, float(gain), v


def honest_gain(spec: MdpSpec) -> float:
    """Average reward per step of publishing every block at once."""
    return (spec.alpha - spec.cost) * spec.block_reward


def honest_policy(tables: MdpTables) -> np.ndarray:
    """Override when ahead, otherwise adopt."""
    return np.array([Action.OVERRIDE if s.l_a > s.l_h else Action.ADOPT for s in tables.states])


def optimal_gain(spec: MdpSpec, eps: float = 1e-9) -> float:
    return solve_policy(build_mdp(spec), eps)[1]


def forks(spec: MdpSpec, eps: float = 1e-9) -> bool:
    return optimal_gain(spec, eps) > honest_gain(spec) + FORK_TOL * spec.block_reward


def mev_threshold(spec: MdpSpec, margin: float = 0.1, eps: float = 1e-9, max_doublings: int = 30):
    """Least MEV (block rewards) for which some forking policy beats honest mining.

    The bracket starts at [0, 1] and doubles its upper end until forking
    pays, then bisects to width ``margin``; the midpoint is returned.
    """
    if not margin > 0:
        raise ValueError("margin must be > 0")
    at = lambda m: forks(replace(spec, mev_value=m), eps)  # noqa: E731
    lo, hi = 0.0, 1.0
    for _ in range(max_doublings):
        if at(hi):
            break
        lo, hi = hi, hi * 2
    else:
        return math.inf
    while hi - lo > margin:
        mid = (lo + hi) / 2
        if at(mid):
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2


def _threshold_row(args):
    spec, margin = args
    return spec.alpha, spec.r_s, mev_threshold(spec, margin)


def sweep(spec: MdpSpec, alphas, margin: float = 0.1, jobs: int = 1):
    """``[(alpha, r_s, mev_v), ...]`` for each alpha, other fields from ``spec``."""
    tasks = [(replace(spec, alpha=float(a)), margin) for a in alphas]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_threshold_row, tasks))
    return [_threshold_row(t) for t in tasks]


def reachable(tables: MdpTables, policy, start: int = 0) -> list[int]:
    """States reachable from ``start`` when following ``policy``."""
    seen = {start}
    stack = [start]
    while stack:
        i = stack.pop()
        row = tables.P[policy[i]].getrow(i)
        for j in row.indices[row.data > 0]:
            if j not in seen:
                seen.add(int(j))
                stack.append(int(j))
    return sorted(seen)
