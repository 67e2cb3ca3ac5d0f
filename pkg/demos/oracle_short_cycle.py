"""
A loss-making short that opens an arbitrage cycle
=================================================

On its own the ETH -> WBTC -> ETH round trip loses money: the edge
weights (-log price) sum to a positive number. Opening a leveraged short
first pushes the pool price the oracle reads, and the cycle turns negative.
"""
from defiprofit import presets
from defiprofit.arbitrage import build_graph, find_negative_cycle
from defiprofit.market import apply_action
from defiprofit.optimizer import optimize_revenue

state, catalog = presets.preset("fig5-bzx")
short = catalog[0]

g = build_graph(state, catalog)
w = g.edge("ETH", "WBTC").weight + g.edge("WBTC", "ETH").weight
print(f"round trip weight before: {w:+.3f}   cycle: {find_negative_cycle(g)}")

pushed = apply_action(state, short, 1_000.0)
c = find_negative_cycle(build_graph(pushed, catalog))
print(f"after a 1000 ETH short:    {c.weight_sum:+.3f}   via {' -> '.join(c.assets)}")

###############################################################################
# The whole three-step strategy, sized by the optimizer
res = optimize_revenue(catalog, state)
for a, x in zip(catalog, res.params):
    print(f"  {a.action_id:28s} {x:12.3f}")
print(f"revenue: {res.revenue:.3f} ETH after {res.sat_probes} feasibility probes")
