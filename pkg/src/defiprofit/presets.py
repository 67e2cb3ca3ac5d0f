"""Bundled scenarios and action catalogs.

Every preset is synthetic: reserves are picked so that the scenario shows
the behaviour it is named after, not copied from chain data (the
appendix-e-bancor reserves are the one exception).
"""
from __future__ import annotations

from decimal import Decimal

import numpy as np

from .market import (BANCOR, CONSTANT_PRODUCT, ONE_TO_ONE, ORACLE_SHORT, Venue, WorldState,
                     make_action)

BASE = "ETH"
TRADER_ETH = 1000.0

# Uniswap ETH/X pools and Bancor BNT/Y converters of the 96-action catalog
UNISWAP_TOKENS = ("AMN", "AMPL", "ANT", "BAT", "BNT", "DAI", "DATA", "ENJ", "FXC", "GNO", "HEDG",
                  "KNC", "MANA", "MKR", "POA20", "RCN", "RDN", "RLC", "SAI", "SAN", "SNT", "TKN",
                  "TRST", "UBT")
BANCOR_TOKENS = tuple(sorted((set(UNISWAP_TOKENS) - {"BNT", "DAI"}) | {"ETH"}))


def cp(venue_id, a, ra, b, rb, fee=(997, 1000)):
    return Venue(venue_id, CONSTANT_PRODUCT, {a: ra, b: rb}, fee=fee)


def bancor(venue_id, a, ra, b, rb, fee_ppm=1000, ratios=None):
    ratios = ratios or {a: 500_000, b: 500_000}
    return Venue(venue_id, BANCOR, {a: ra, b: rb}, fee_ppm=fee_ppm, ratios=ratios)


def both_ways(venue, oracle=None):
    a, b = venue.assets
    return [make_action(venue, a, b), make_action(venue, b, a)]


def state_of(venues, balances=None, height=0):
    return WorldState(height, balances or {BASE: TRADER_ETH}, {v.venue_id: v for v in venues})


def _wei(text: str) -> float:
    return float(Decimal(text) / Decimal(10) ** 18)


# --- appendix-b-96 ---------------------------------------------------------

def appendix_b_state(seed: int = 0, height: int = 0) -> WorldState:
    """The 96-action venue set with seeded, roughly consistent reserves."""
    rng = np.random.default_rng(seed)
    assets = sorted(set(UNISWAP_TOKENS) | set(BANCOR_TOKENS) - {BASE})
    # units of token per ETH, with a few percent of noise per venue
    price = {a: float(10 ** rng.uniform(-1, 3)) for a in assets}
    price["SAI"] = price["DAI"]
    venues = []
    for t in UNISWAP_TOKENS:
        depth = float(10 ** rng.uniform(2, 4))
        venues.append(cp(f"uniswap-{t}", BASE, depth, t, depth * price[t] * rng.uniform(0.97, 1.03)))
    for t in BANCOR_TOKENS:
        depth = float(10 ** rng.uniform(2, 4))  # in ETH terms
        per_eth = 1.0 if t == BASE else price[t]
        venues.append(bancor(f"bancor-{t}", t, depth * per_eth,
                             "BNT", depth * price["BNT"] * rng.uniform(0.97, 1.03)))
    venues.append(Venue("makerdao-sai", ONE_TO_ONE, {"DAI": 1e7, "SAI": 1e7}))
    return state_of(venues, height=height)


def appendix_b_catalog(state: WorldState | None = None):
    state = state or appendix_b_state()
    actions = []
    for vid in sorted(state.venues):
        actions += both_ways(state.venues[vid])
    return actions


# --- fig5-bzx --------------------------------------------------------------

FIG5_WBTC_ETH = 44.1488   # WBTC -> ETH spot on the uniswap pool
FIG5_ETH_WBTC = 0.0170    # ETH -> WBTC spot on the lending venue
FIG5_POOL_ETH = 8580.0    # sized so a 1000 ETH x5 short flips the cycle to about -0.63
FIG5_LEVERAGE = 5.0


def fig5_state() -> WorldState:
    pool_wbtc = 0.997 * FIG5_POOL_ETH / FIG5_WBTC_ETH
    uniswap = cp("uniswap-wbtc", "ETH", FIG5_POOL_ETH, "WBTC", pool_wbtc)
    # a deep no-fee pool stands in for borrowing WBTC at a fixed rate
    compound = cp("compound-wbtc", "ETH", 1e9, "WBTC", 1e9 * FIG5_ETH_WBTC, fee=(1, 1))
    short = Venue("bzx-wbtc", ORACLE_SHORT, {"ETH": 5000.0, "WBTC": 0.0},
                  collateral_ratio=FIG5_LEVERAGE, oracle="uniswap-wbtc", short_asset="WBTC")
    return state_of([uniswap, compound, short], {BASE: 10_000.0})


def fig5_catalog(state: WorldState | None = None):
    s = state or fig5_state()
    v = s.venues
    return [
        make_action(v["bzx-wbtc"], "ETH", oracle=v["uniswap-wbtc"]),
        make_action(v["compound-wbtc"], "ETH", "WBTC"),
        make_action(v["uniswap-wbtc"], "WBTC", "ETH"),
    ]


# --- block-9819643-style ---------------------------------------------------

def block_state(mkr_gap=0.058, bat_edge=0.008, bat_depth=400.0, mkr_depth=600.0,
                bnt_depth=20_000.0) -> WorldState:
    """Two overlapping opportunities sharing the BNT->MKR->ETH legs.

    MKR trades ``mkr_gap`` cheaper on Bancor than on Uniswap. Buying BNT via
    the BAT detour starts ``bat_edge`` better than Bancor's ETH converter but
    slips faster, so the detour is the cycle the graph search closes first
    while the direct route holds more revenue (about 0.20 vs 0.11 ETH).
    """
    bnt_per_eth = 800.0
    mkr_eth = 2.0          # ETH per MKR
    bat_per_eth = 1000.0
    venues = [
        bancor("bancor-ETH", "ETH", bnt_depth, "BNT", bnt_depth * bnt_per_eth),
        bancor("bancor-MKR", "MKR", mkr_depth / mkr_eth, "BNT",
               mkr_depth * bnt_per_eth * (1 - mkr_gap)),
        cp("uniswap-MKR", "ETH", mkr_depth, "MKR", mkr_depth / mkr_eth),
        cp("uniswap-BAT", "ETH", bat_depth, "BAT", bat_depth * bat_per_eth),
        bancor("bancor-BAT", "BAT", bat_depth * bat_per_eth, "BNT",
               bat_depth * bnt_per_eth * (1 + bat_edge) / 0.997),
    ]
    return state_of(venues, height=9_819_643)


def block_catalog(state: WorldState | None = None):
    s = state or block_state()
    actions = []
    for vid in sorted(s.venues):
        actions += both_ways(s.venues[vid])
    # selling BNT back on the ETH converter would make the detour's first two
    # legs an arbitrage of their own
    return [a for a in actions if a.action_id != "bancor-ETH:BNT->ETH"]


def block_strategies(state: WorldState | None = None):
    """Action-id paths of the two overlapping strategies (direct, detour)."""
    direct = ("bancor-ETH:ETH->BNT", "bancor-MKR:BNT->MKR", "uniswap-MKR:MKR->ETH")
    detour = ("uniswap-BAT:ETH->BAT", "bancor-BAT:BAT->BNT", "bancor-MKR:BNT->MKR",
              "uniswap-MKR:MKR->ETH")
    return direct, detour


# --- appendix-e-bancor -----------------------------------------------------

APPENDIX_E = {
    "bancor_eth": "10936591981278719837125",
    "bancor_bnt": "8792249012668956788248921",
    "uniswap_eth": "135368255883939133529",
    "uniswap_bnt": "108143877658121296155075",
}


def appendix_e_state() -> WorldState:
    """Reserves of a two-action ETH->BNT->ETH instance (wei strings), in ETH units."""
    e = {k: _wei(v) for k, v in APPENDIX_E.items()}
    venues = [
        bancor("bancor", "ETH", e["bancor_eth"], "BNT", e["bancor_bnt"]),
        cp("uniswap", "BNT", e["uniswap_bnt"], "ETH", e["uniswap_eth"]),
    ]
    return state_of(venues, height=9_680_000)


def appendix_e_catalog(state: WorldState | None = None):
    s = state or appendix_e_state()
    return both_ways(s.venues["bancor"]) + both_ways(s.venues["uniswap"])


# --- fig2: a three-market path calibrated to 7.81 ETH ----------------------

FIG2_TARGET = 7.81
# unscaled reserves; revenue is homogeneous of degree one in all reserves
# and the trader balance, so scaling them together moves the optimum linearly
_FIG2_RAW = {"eth_dai": 1000.0, "dai": 200_000.0, "sai": 191_000.0, "eth_sai": 1000.0}


def _fig2_raw(scale: float) -> WorldState:
    r = {k: v * scale for k, v in _FIG2_RAW.items()}
    venues = [
        cp("uniswap-DAI", "ETH", r["eth_dai"], "DAI", r["dai"]),
        Venue("makerdao-sai", ONE_TO_ONE, {"DAI": 1e9, "SAI": 1e9}),
        cp("uniswap-SAI", "ETH", r["eth_sai"], "SAI", r["sai"]),
    ]
    return state_of(venues, {BASE: 1e6}, height=10_001_087)


FIG2_PATH = ("uniswap-DAI:ETH->DAI", "makerdao-sai:DAI->SAI", "uniswap-SAI:SAI->ETH")


def fig2_catalog(state: WorldState | None = None):
    s = state or fig2_state()
    return [make_action(s.venues["uniswap-DAI"], "ETH", "DAI"),
            make_action(s.venues["makerdao-sai"], "DAI", "SAI"),
            make_action(s.venues["uniswap-SAI"], "SAI", "ETH")]


def fig2_state() -> WorldState:
    return _fig2_raw(FIG2_RESERVE_SCALE)


# 7.81 / (best revenue of the unscaled path); the tests re-derive the optimum
FIG2_RESERVE_SCALE = 38.931103242501464


STATES = {
    "appendix-b-96": appendix_b_state,
    "fig5-bzx": fig5_state,
    "block-9819643-style": block_state,
    "appendix-e-bancor": appendix_e_state,
    "fig2": fig2_state,
}

CATALOGS = {
    "appendix-b-96": appendix_b_catalog,
    "fig5-bzx": fig5_catalog,
    "block-9819643-style": block_catalog,
    "appendix-e-bancor": appendix_e_catalog,
    "fig2": fig2_catalog,
}


def preset(name: str):
    """``(state, catalog)`` for a bundled scenario."""
    try:
        state = STATES[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(STATES)}") from None
    return state, CATALOGS[name](state)
