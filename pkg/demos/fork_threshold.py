"""
How much MEV makes forking worth it
===================================

A miner with hash share alpha can fork the chain to claim value sitting in
a past block. The MDP compares the best forking policy against honest
mining; the threshold is the least MEV (in block rewards) where forking
wins. Bigger miners need less.
"""
import numpy as np

from defiprofit.mdp import MdpSpec, build_mdp, honest_gain, mev_threshold, solve_policy, sweep

spec = MdpSpec(alpha=0.10, r_s=0.0572, k=1, cutoff=20)
print(f"threshold at alpha=0.10: {mev_threshold(spec):.2f} block rewards")

###############################################################################
# Just above the threshold the optimal policy beats honest mining
above = MdpSpec(alpha=0.10, r_s=0.0572, k=1, cutoff=20, mev_value=5.0)
_, gain, _ = solve_policy(build_mdp(above), 1e-9)
print(f"gain with 5 rewards of MEV: {gain:.6f} vs honest {honest_gain(above):.6f}")

###############################################################################
# Threshold against hash share, with and without stale blocks
alphas = np.round(np.arange(0.05, 0.451, 0.05), 2)
stale = sweep(spec, alphas, jobs=4)
fresh = sweep(MdpSpec(alpha=0.1, r_s=0.0, k=1, cutoff=20), alphas, jobs=4)
print("\nalpha   r_s=0.0572   r_s=0")
for (a, _, v1), (_, _, v0) in zip(stale, fresh):
    print(f"{a:5.2f} {v1:10.3f} {v0:9.3f}")
