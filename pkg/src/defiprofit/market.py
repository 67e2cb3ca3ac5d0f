"""Market venues, trader state and the action transition function.

All amounts are float64 in asset units. States are immutable values: every
transition returns a fresh :class:`WorldState` and leaves its input untouched.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ConstraintViolated,
    EmptyReserve,
    InsufficientBalance,
    InsufficientLiquidity,
    NonFiniteResult,
    UnknownAction,
    UnknownAsset,
)

CONSTANT_PRODUCT = "ConstantProduct"
BANCOR = "BancorConverter"
ONE_TO_ONE = "OneToOne"
ORACLE_SHORT = "OracleShort"
KINDS = (CONSTANT_PRODUCT, BANCOR, ONE_TO_ONE, ORACLE_SHORT)

TRADER = "trader"
PPM = 1_000_000

# relative tolerance for "balance restored" and state-equality checks
STATE_RTOL = 1e-9


@dataclass(frozen=True)
class Venue:
    """One tradable market.

    ``fee`` is the (numerator, denominator) multiplier a ConstantProduct pool
    applies to the input amount, ``fee_ppm`` and ``ratios`` are the Bancor
    converter fee and connector weights in parts per million. An OracleShort
    venue opens a leveraged short of ``short_asset`` against its input asset
    and buys the short leg on the ``oracle`` venue, whose spot price it reads.
    """

    venue_id: str
    kind: str
    reserves: Mapping[str, float]
    fee: tuple[int, int] = (997, 1000)
    fee_ppm: int = 1000
    ratios: Mapping[str, int] = field(default_factory=dict)
    collateral_ratio: float = 1.0
    oracle: str | None = None
    short_asset: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "reserves", {a: float(v) for a, v in self.reserves.items()})
        object.__setattr__(self, "ratios", {a: int(v) for a, v in self.ratios.items()})
        object.__setattr__(self, "fee", (int(self.fee[0]), int(self.fee[1])))
        if self.kind not in KINDS:
            raise ValueError(f"unknown venue kind {self.kind!r}")
        for asset, amount in self.reserves.items():
            if not math.isfinite(amount) or amount < 0:
                raise ValueError(f"{self.venue_id}: reserve of {asset} must be finite and >= 0")
        if self.kind in (CONSTANT_PRODUCT, BANCOR, ONE_TO_ONE) and len(self.reserves) != 2:
            raise ValueError(f"{self.venue_id}: {self.kind} needs exactly 2 reserve assets")
        if self.kind == CONSTANT_PRODUCT:
            num, den = self.fee
            if den <= 0 or not 0 < num <= den:
                raise ValueError(f"{self.venue_id}: fee multiplier must lie in (0, 1]")
        if self.kind == BANCOR:
            if set(self.ratios) != set(self.reserves):
                raise ValueError(f"{self.venue_id}: one connector ratio per reserve required")
            if any(not 0 < r <= PPM for r in self.ratios.values()):
                raise ValueError(f"{self.venue_id}: connector ratios must lie in (0, 1e6]")
            if not 0 <= self.fee_ppm < PPM:
                raise ValueError(f"{self.venue_id}: fee must lie in [0, 1e6)")
        if self.kind == ORACLE_SHORT:
            if self.oracle is None or self.short_asset is None:
                raise ValueError(f"{self.venue_id}: OracleShort needs oracle and short_asset")
            if self.short_asset not in self.reserves or len(self.reserves) != 2:
                raise ValueError(f"{self.venue_id}: reserves must hold collateral and short asset")
            if self.collateral_ratio < 1:
                raise ValueError(f"{self.venue_id}: collateral_ratio must be >= 1")

    @property
    def assets(self) -> tuple[str, ...]:
        return tuple(self.reserves)

    def other(self, asset: str) -> str:
        if asset not in self.reserves:
            raise UnknownAsset(f"{asset} is not traded on {self.venue_id}")
        (out,) = [a for a in self.reserves if a != asset]
        return out

    @property
    def is_live(self) -> bool:
        return all(v > 0 for v in self.reserves.values())

    def fields(self) -> dict[str, float]:
        """Storage fields of this venue, keyed by field name."""
        out: dict[str, float] = dict(self.reserves)
        if self.kind == CONSTANT_PRODUCT:
            out["fee"] = self.fee[0] / self.fee[1]
        elif self.kind == BANCOR:
            out["fee"] = float(self.fee_ppm)
            out.update({f"ratio:{a}": float(r) for a, r in self.ratios.items()})
        elif self.kind == ORACLE_SHORT:
            out["collateral_ratio"] = float(self.collateral_ratio)
        return out

    def with_reserves(self, **changes: float) -> "Venue":
        reserves = dict(self.reserves)
        reserves.update(changes)
        return replace(self, reserves=reserves)


def _check_amount(amount):
    if np.any(np.asarray(amount) < 0):
        raise ValueError("amount_in must be >= 0")


def _bancor_factor(venue: Venue, input_asset: str) -> float:
    out = venue.other(input_asset)
    return venue.ratios[input_asset] / venue.ratios[out]


def quote(venue: Venue, input_asset: str, amount_in, oracle: Venue | None = None):
    """Output amount for selling ``amount_in`` of ``input_asset`` on ``venue``.

    Works elementwise on numpy arrays for the pool kinds. OracleShort needs
    the oracle venue and returns the short position size in ``short_asset``.
    """
    _check_amount(amount_in)
    if venue.kind == ORACLE_SHORT:
        if input_asset == venue.short_asset or input_asset not in venue.reserves:
            raise UnknownAsset(f"{venue.venue_id} takes collateral in {venue.other(venue.short_asset)}")
        if oracle is None:
            raise ValueError("OracleShort quote needs the oracle venue")
        return amount_in * venue.collateral_ratio * spot_price(oracle, input_asset)
    out_asset = venue.other(input_asset)
    x = venue.reserves[input_asset]
    y = venue.reserves[out_asset]
    if venue.kind == CONSTANT_PRODUCT:
        if x == 0:
            raise EmptyReserve(f"{venue.venue_id}: empty {input_asset} reserve")
        num, den = venue.fee
        effective = amount_in * num / den
        result = y * effective / (x + effective)
    elif venue.kind == BANCOR:
        w = _bancor_factor(venue, input_asset)
        if x == 0:
            raise EmptyReserve(f"{venue.venue_id}: empty {input_asset} reserve")
        # 1 - (x/(x+a))**w without cancellation for small a
        gain = -np.expm1(-w * np.log1p(np.asarray(amount_in, dtype=float) / x))
        result = y * gain * (PPM - venue.fee_ppm) ** 2 / PPM**2
    else:
        result = amount_in
    if not np.all(np.isfinite(result)):
        raise NonFiniteResult(f"{venue.venue_id}: non-finite quote for {amount_in!r}")
    return float(result) if np.ndim(result) == 0 else np.asarray(result)


def spot_price(venue: Venue, input_asset: str, oracle: Venue | None = None) -> float:
    """Marginal output per unit input for an infinitesimal trade."""
    if venue.kind == ORACLE_SHORT:
        if oracle is None:
            raise ValueError("OracleShort spot price needs the oracle venue")
        return venue.collateral_ratio * spot_price(oracle, input_asset)
    out_asset = venue.other(input_asset)
    x = venue.reserves[input_asset]
    y = venue.reserves[out_asset]
    if venue.kind == ONE_TO_ONE:
        return 1.0
    if x == 0 or y == 0:
        raise EmptyReserve(f"{venue.venue_id}: price undefined with an empty reserve")
    if venue.kind == CONSTANT_PRODUCT:
        return venue.fee[0] / venue.fee[1] * y / x
    w = _bancor_factor(venue, input_asset)
    return y * w / x * ((PPM - venue.fee_ppm) / PPM) ** 2


@dataclass(frozen=True)
class ActionSpec:
    """A directed trade capability on one venue.

    ``output_asset`` is None for actions that return nothing to the trader.
    ``storage_keys`` are ``(owner, field)`` pairs; owner is ``"trader"`` or a
    venue id.
    """

    action_id: str
    venue: str
    input_asset: str
    output_asset: str | None
    storage_keys: frozenset

    def __post_init__(self):
        object.__setattr__(self, "storage_keys", frozenset(tuple(k) for k in self.storage_keys))
        if not self.storage_keys:
            raise ValueError(f"{self.action_id}: storage_keys must be non-empty")
        needed = {(TRADER, self.input_asset)}
        if self.output_asset is not None:
            needed.add((TRADER, self.output_asset))
        if not needed <= self.storage_keys:
            raise ValueError(f"{self.action_id}: storage_keys miss trader balance keys")

    @property
    def returns(self) -> bool:
        return self.output_asset is not None


def derive_storage_keys(venue: Venue, input_asset: str, output_asset: str | None,
                        oracle: Venue | None = None) -> frozenset:
    keys = {(TRADER, input_asset)}
    if output_asset is not None:
        keys.add((TRADER, output_asset))
    keys.update((venue.venue_id, f) for f in venue.fields())
    if oracle is not None:
        keys.update((oracle.venue_id, f) for f in oracle.fields())
    return frozenset(keys)


def make_action(venue: Venue, input_asset: str, output_asset: str | None = None,
                action_id: str | None = None, oracle: Venue | None = None) -> ActionSpec:
    """Build an action on ``venue`` with its storage keys filled in."""
    if venue.kind == ORACLE_SHORT:
        output_asset = None
        if oracle is None:
            raise ValueError("OracleShort actions need the oracle venue for their keys")
    elif output_asset is None:
        output_asset = venue.other(input_asset)
    if action_id is None:
        arrow = f"{input_asset}->{output_asset}" if output_asset else f"{input_asset}->short:{venue.short_asset}"
        action_id = f"{venue.venue_id}:{arrow}"
    return ActionSpec(action_id, venue.venue_id, input_asset, output_asset,
                      derive_storage_keys(venue, input_asset, output_asset, oracle))


@dataclass(frozen=True)
class WorldState:
    """Trader balances plus every venue at one block height."""

    block_height: int
    balances: Mapping[str, float]
    venues: Mapping[str, Venue]

    def __post_init__(self):
        object.__setattr__(self, "balances", {a: float(v) for a, v in self.balances.items()})
        object.__setattr__(self, "venues", dict(self.venues))
        if self.block_height < 0:
            raise ValueError("block_height must be >= 0")
        for asset, amount in self.balances.items():
            if not math.isfinite(amount):
                raise ValueError(f"balance of {asset} must be finite")

    def balance(self, asset: str) -> float:
        return self.balances.get(asset, 0.0)

    def venue(self, venue_id: str) -> Venue:
        try:
            return self.venues[venue_id]
        except KeyError:
            raise UnknownAction(f"unknown venue {venue_id!r}") from None

    def read(self, key) -> float:
        owner, name = key
        if owner == TRADER:
            return self.balance(name)
        return self.venue(owner).fields().get(name, 0.0)

    @property
    def assets(self) -> set[str]:
        out = set(self.balances)
        for v in self.venues.values():
            out.update(v.reserves)
        return out

    def storage(self) -> dict:
        """Every storage field of this state, as ``{(owner, field): value}``."""
        out = {(TRADER, a): v for a, v in self.balances.items()}
        for vid, venue in self.venues.items():
            out.update({(vid, f): val for f, val in venue.fields().items()})
        return out

    def evolve(self, balances=None, venues=None, block_height=None) -> "WorldState":
        new_bal = dict(self.balances)
        new_bal.update(balances or {})
        new_venues = dict(self.venues)
        new_venues.update(venues or {})
        height = self.block_height if block_height is None else block_height
        return WorldState(height, new_bal, new_venues)


def changed_keys(before: WorldState, after: WorldState) -> set:
    a, b = before.storage(), after.storage()
    return {k for k in a.keys() | b.keys() if a.get(k, 0.0) != b.get(k, 0.0)}


def apply_action(state: WorldState, action: ActionSpec, x: float) -> WorldState:
    """Execute ``action`` with input amount ``x`` and return the next state."""
    if x < 0 or not math.isfinite(x):
        raise ValueError(f"{action.action_id}: input amount must be finite and >= 0, got {x!r}")
    held = state.balance(action.input_asset)
    if x > held:
        raise InsufficientBalance(f"{action.action_id}: needs {x!r} {action.input_asset}, holds {held!r}")
    venue = state.venue(action.venue)
    if action.input_asset not in venue.reserves:
        raise UnknownAsset(f"{action.input_asset} is not traded on {venue.venue_id}")
    if x == 0:
        return state.evolve()

    balances = {action.input_asset: held - x}
    if venue.kind == ORACLE_SHORT:
        oracle = state.venue(venue.oracle)
        notional = x * venue.collateral_ratio
        borrowed = notional - x
        if borrowed > venue.reserves[action.input_asset]:
            raise InsufficientLiquidity(f"{venue.venue_id}: cannot lend {borrowed!r}")
        bought = quote(oracle, action.input_asset, notional)
        short = venue.short_asset
        new_oracle = oracle.with_reserves(**{
            action.input_asset: oracle.reserves[action.input_asset] + notional,
            short: oracle.reserves[short] - bought,
        })
        new_venue = venue.with_reserves(**{
            action.input_asset: venue.reserves[action.input_asset] - borrowed,
            short: venue.reserves[short] + bought,
        })
        return state.evolve(balances, {venue.venue_id: new_venue, oracle.venue_id: new_oracle})

    out_asset = action.output_asset
    got = quote(venue, action.input_asset, x)
    if got > venue.reserves[out_asset]:
        raise InsufficientLiquidity(f"{venue.venue_id}: output {got!r} exceeds reserve")
    if venue.kind == CONSTANT_PRODUCT:
        # x*y/(x + a) directly; y - got cancels badly when a >> x
        x0, y0 = venue.reserves[action.input_asset], venue.reserves[out_asset]
        left = y0 * x0 / (x0 + x * venue.fee[0] / venue.fee[1])
    else:
        left = venue.reserves[out_asset] - got
    new_venue = venue.with_reserves(**{
        action.input_asset: venue.reserves[action.input_asset] + x,
        out_asset: left,
    })
    if out_asset == action.input_asset:  # pragma: no cover - venues never pair an asset with itself
        raise ValueError("degenerate action")
    balances[out_asset] = state.balance(out_asset) + got
    return state.evolve(balances, {venue.venue_id: new_venue})


@dataclass(frozen=True)
class Strategy:
    """A path, one input amount per action, and its realised base revenue."""

    path: tuple
    params: tuple
    initial_state: WorldState
    revenue: float
    base: str = "ETH"

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(self.path))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.path) != len(self.params):
            raise ValueError("one parameter per action required")
        ids = self.action_ids
        if len(set(ids)) != len(ids):
            raise ValueError("path actions must be pairwise distinct")
        if any(p < 0 for p in self.params):
            raise ValueError("parameters must be non-negative")

    @property
    def action_ids(self) -> tuple[str, ...]:
        return tuple(a.action_id for a in self.path)


def execute(state: WorldState, path: Sequence[ActionSpec], params: Sequence[float]) -> list[WorldState]:
    """Apply each action in turn and return the full state trace."""
    trace = [state]
    for action, x in zip(path, params, strict=True):
        trace.append(apply_action(trace[-1], action, x))
    return trace


def check_restored(trace: Sequence[WorldState], base: str, assets: Iterable[str]) -> None:
    first, last = trace[0], trace[-1]
    for asset in sorted(set(assets) - {base}):
        b0, bn = first.balance(asset), last.balance(asset)
        scale = max(abs(s.balance(asset)) for s in trace)
        if abs(bn - b0) > STATE_RTOL * scale:
            raise ConstraintViolated(asset, b0, bn)


def strategy_revenue(state: WorldState, strategy: Strategy) -> float:
    """Base-asset revenue of ``strategy`` executed on ``state``.

    Raises ConstraintViolated if some other balance ends away from its start.
    """
    trace = execute(state, strategy.path, strategy.params)
    touched = {a.input_asset for a in strategy.path} | {a.output_asset for a in strategy.path if a.returns}
    check_restored(trace, strategy.base, touched)
    return trace[-1].balance(strategy.base) - state.balance(strategy.base)


def segment_starts(path: Sequence[ActionSpec]) -> list[bool]:
    """True where an action does not consume the previous action's output."""
    starts = []
    prev = None
    for action in path:
        starts.append(prev is None or not prev.returns or prev.output_asset != action.input_asset)
        prev = action
    return starts


def chain(state: WorldState, path: Sequence[ActionSpec], entries: Sequence[float]):
    """Run ``path`` feeding every received amount into the next action.

    ``entries`` supplies the amount for each segment start. Returns
    ``(params, trace)``.
    """
    starts = segment_starts(path)
    if sum(starts) != len(entries):
        raise ValueError(f"path needs {sum(starts)} entry amounts, got {len(entries)}")
    it = iter(entries)
    trace = [state]
    params = []
    received = 0.0
    for action, start in zip(path, starts):
        x = float(next(it)) if start else received
        cur = trace[-1]
        nxt = apply_action(cur, action, x)
        if action.returns:
            received = nxt.balance(action.output_asset) - cur.balance(action.output_asset)
        params.append(x)
        trace.append(nxt)
    return params, trace
