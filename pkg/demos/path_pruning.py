"""
How far the flow heuristics cut the path space
==============================================

Every ordered selection of distinct actions is a candidate path. Rules on
how assets flow between actions throw out nearly all of them before any
pricing happens, and prefix pruning means most are never generated.
"""
import time

from defiprofit import presets
from defiprofit.paths import check_heuristics, enumerate_pruned

catalog = presets.appendix_b_catalog()
t0 = time.perf_counter()
paths, stats = enumerate_pruned(catalog, "ETH", 5)
dt = time.perf_counter() - t0

print(" len        all ordered    kept")
for k in range(1, 6):
    print(f"{k:4d} {stats.before(k):18,d} {stats.after(k):7d}")
print(f"{len(paths)} paths kept in {dt:.2f} s")

###############################################################################
# Why a few paths were rejected
idx = {a.action_id: a for a in catalog}
for p in [paths[0][:1], paths[0][::-1], paths[0]]:
    r = check_heuristics(p, "ETH", idx)
    print(f"{r.verdict:14s} {' '.join(p)}")
