"""Profit discovery over modelled DeFi venues, plus a fork-incentive MDP."""
from .errors import DefiError
from .market import (ActionSpec, Strategy, Venue, WorldState, apply_action, make_action, quote,
                     spot_price, strategy_revenue)
from .arbitrage import build_graph, connect_to_base, find_negative_cycle, greedy_param_search, run_arb
from .paths import actions_independent, check_heuristics, enumerate_pruned
from .optimizer import is_sat, optimize_revenue, rank_paths
from .smtlib import export_smtlib
from .replay import BlockSeries, CostModel, replay, state_changed
from .mdp import MdpSpec, build_mdp, mev_threshold, solve_policy

__version__ = "0.1.0"

__all__ = [
    "DefiError", "ActionSpec", "Strategy", "Venue", "WorldState", "apply_action", "make_action",
    "quote", "spot_price", "strategy_revenue", "build_graph", "connect_to_base",
    "find_negative_cycle", "greedy_param_search", "run_arb", "actions_independent",
    "check_heuristics", "enumerate_pruned", "is_sat", "optimize_revenue", "rank_paths",
    "export_smtlib", "BlockSeries", "CostModel", "replay", "state_changed", "MdpSpec",
    "build_mdp", "mev_threshold", "solve_policy",
]
