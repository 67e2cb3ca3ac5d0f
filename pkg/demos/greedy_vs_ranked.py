"""
Taking the first cycle can cost the better one
==============================================

The cycle loop commits whichever profitable cycle it finds first. Here that
is the smaller of two overlapping strategies, and committing it moves a
shared pool far enough that the bigger one no longer clears the floor.
Ranking whole paths by optimised revenue picks the bigger one instead.
"""
from defiprofit import presets
from defiprofit.arbitrage import run_arb
from defiprofit.market import apply_action
from defiprofit.optimizer import optimize_revenue, rank_paths

state, catalog = presets.preset("block-9819643-style")
idx = {a.action_id: a for a in catalog}
direct, detour = presets.block_strategies()

best = rank_paths([direct, detour], state, catalog)
print(f"ranked:  {best.revenue:.3f} ETH  {' '.join(best.action_ids)}")

arb = run_arb(state, catalog)
for s in arb.strategies:
    print(f"greedy:  {s.revenue:.3f} ETH  {' '.join(s.action_ids)}")

after = arb.strategies[0].initial_state
for a, x in zip(arb.strategies[0].path, arb.strategies[0].params):
    after = apply_action(after, a, x)
left = optimize_revenue([idx[a] for a in direct], after, min_target=1e-6)
print(f"the ranked path is worth {left.revenue if left else 0.0:.3f} ETH afterwards")
