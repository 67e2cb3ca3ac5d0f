"""JSON snapshots and action catalogs.

Amounts travel as decimal strings. Floats are written with ``repr`` so a
dump/load cycle is exact.
"""
from __future__ import annotations

import json
from decimal import Decimal
from pathlib import Path

from .errors import InvalidSpec, UnsupportedVenueKind
from .market import (BANCOR, CONSTANT_PRODUCT, KINDS, ONE_TO_ONE, ORACLE_SHORT, ActionSpec,
                     Venue, WorldState)


def amount(text) -> float:
    """Parse a decimal string (or plain number) as float64."""
    if isinstance(text, bool):
        raise InvalidSpec(f"not an amount: {text!r}")
    if isinstance(text, (int, float)):
        return float(text)
    try:
        return float(Decimal(str(text)))
    except ArithmeticError as err:
        raise InvalidSpec(f"not a decimal amount: {text!r}") from err


def fmt(x: float) -> str:
    return repr(float(x))


def venue_to_dict(v: Venue) -> dict:
    d = {"venue_id": v.venue_id, "kind": v.kind,
         "reserves": {a: fmt(x) for a, x in sorted(v.reserves.items())}}
    if v.kind == CONSTANT_PRODUCT:
        d["fee"] = {"numerator": v.fee[0], "denominator": v.fee[1]}
    elif v.kind == BANCOR:
        d["fee"] = {"ppm": v.fee_ppm, "ratios": dict(sorted(v.ratios.items()))}
    elif v.kind == ONE_TO_ONE:
        d["fee"] = {}
    else:
        d["fee"] = {"collateral_ratio": fmt(v.collateral_ratio), "oracle": v.oracle,
                    "short_asset": v.short_asset}
    return d


def venue_from_dict(d: dict) -> Venue:
    kind = d.get("kind")
    if kind not in KINDS:
        raise UnsupportedVenueKind(f"venue {d.get('venue_id')!r}: unknown kind {kind!r}")
    fee = d.get("fee") or {}
    reserves = {a: amount(x) for a, x in d["reserves"].items()}
    try:
        if kind == CONSTANT_PRODUCT:
            return Venue(d["venue_id"], kind, reserves,
                         fee=(fee.get("numerator", 997), fee.get("denominator", 1000)))
        if kind == BANCOR:
            return Venue(d["venue_id"], kind, reserves, fee_ppm=fee.get("ppm", 1000),
                         ratios=fee.get("ratios", {}))
        if kind == ORACLE_SHORT:
            return Venue(d["venue_id"], kind, reserves,
                         collateral_ratio=amount(fee.get("collateral_ratio", 1)),
                         oracle=fee.get("oracle"), short_asset=fee.get("short_asset"))
        return Venue(d["venue_id"], kind, reserves)
    except (KeyError, ValueError) as err:
        raise InvalidSpec(f"bad venue {d.get('venue_id')!r}: {err}") from err


def state_to_dict(state: WorldState) -> dict:
    return {
        "block_height": state.block_height,
        "balances": {a: fmt(x) for a, x in sorted(state.balances.items())},
        "venues": [venue_to_dict(state.venues[k]) for k in sorted(state.venues)],
    }


def state_from_dict(d: dict) -> WorldState:
    try:
        venues = [venue_from_dict(v) for v in d["venues"]]
        balances = {a: amount(x) for a, x in d.get("balances", {}).items()}
        state = WorldState(int(d["block_height"]), balances, {v.venue_id: v for v in venues})
    except (KeyError, TypeError, ValueError) as err:
        raise InvalidSpec(f"bad snapshot: {err}") from err
    for v in venues:
        if v.kind == ORACLE_SHORT and v.oracle not in state.venues:
            raise InvalidSpec(f"{v.venue_id}: oracle venue {v.oracle!r} missing")
    return state


def action_to_dict(a: ActionSpec) -> dict:
    return {"action_id": a.action_id, "venue": a.venue, "input_asset": a.input_asset,
            "output_asset": a.output_asset,
            "storage_keys": sorted([list(k) for k in a.storage_keys])}


def action_from_dict(d: dict) -> ActionSpec:
    try:
        return ActionSpec(d["action_id"], d["venue"], d["input_asset"], d.get("output_asset"),
                          frozenset(tuple(k) for k in d["storage_keys"]))
    except (KeyError, TypeError, ValueError) as err:
        raise InvalidSpec(f"bad action {d.get('action_id')!r}: {err}") from err


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def save_snapshot(state: WorldState, path) -> None:
    Path(path).write_text(dumps(state_to_dict(state)))


def load_snapshot(path) -> WorldState:
    return state_from_dict(_read_json(path))


def save_catalog(actions, path) -> None:
    Path(path).write_text(dumps([action_to_dict(a) for a in actions]))


def load_catalog(path_or_preset) -> list[ActionSpec]:
    """Load a catalog file, or a bundled preset by name (e.g. ``appendix-b-96``)."""
    from . import presets

    name = str(path_or_preset)
    if name in presets.CATALOGS:
        return presets.CATALOGS[name]()
    data = _read_json(path_or_preset)
    if not isinstance(data, list):
        raise InvalidSpec("catalog must be a JSON list of actions")
    actions = [action_from_dict(d) for d in data]
    ids = [a.action_id for a in actions]
    if len(set(ids)) != len(ids):
        raise InvalidSpec("duplicate action ids in catalog")
    return actions


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise InvalidSpec(f"{path}: {err}") from err
