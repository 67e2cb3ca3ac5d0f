"""
Replaying a block series and skipping quiet blocks
==================================================

A path is only searched again when one of the storage keys it touches
changed since the previous block. On a 100-block series where 30 blocks
move the pools, the other 70 cost nothing.
"""
import numpy as np

from defiprofit import presets
from defiprofit.paths import enumerate_pruned
from defiprofit.replay import CostModel, make_series, replay

state, catalog = presets.preset("block-9819643-style")
paths, _ = enumerate_pruned({a.action_id: a for a in catalog}, "ETH", 4)
series, touched = make_series(state, n_blocks=100, n_touched=30, seed=11)

rep = replay(series, catalog=catalog, paths=paths, cost=CostModel(gas_price=32.0))
print(f"{len(paths)} paths x {len(series)} blocks, {rep.discovery_calls} searches")
print(f"gross {rep.gross:.3f} ETH, net of gas {rep.net:.3f} ETH, {len(rep.committed)} commits")

###############################################################################
# Cumulative revenue only steps on blocks that changed
cum = rep.cumulative(net=True)
steps = np.flatnonzero(np.diff(np.concatenate([[0.0], cum])))
print("revenue steps at blocks:", steps.tolist())
print("all of them touched:", set(steps.tolist()) <= set(touched))

###############################################################################
# Same series with the cycle loop instead of path search
arb = replay(series, discovery="arb", catalog=catalog)
print(f"cycle loop: {arb.discovery_calls} runs, gross {arb.gross:.3f} ETH")
