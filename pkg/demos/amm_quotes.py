"""
Quotes, spot prices and price impact
====================================

Two pools with the same reserves: a constant-product pool and a weighted
bonding curve. Small trades fill at the spot price, large ones slide.
"""
import numpy as np

from defiprofit.market import BANCOR, CONSTANT_PRODUCT, Venue, quote, spot_price

pool = Venue("pool", CONSTANT_PRODUCT, {"ETH": 1_000.0, "DAI": 200_000.0}, fee=(997, 1000))
curve = Venue("curve", BANCOR, {"ETH": 1_000.0, "DAI": 200_000.0}, fee_ppm=1000,
              ratios={"ETH": 500_000, "DAI": 500_000})

###############################################################################
# Marginal price first
for v in (pool, curve):
    print(f"{v.venue_id:6s} spot DAI per ETH: {spot_price(v, 'ETH'):10.3f}")

###############################################################################
# Average fill price against trade size
sizes = np.geomspace(0.01, 1_000, 6)
print("\n  size ETH   pool avg   curve avg")
for a in sizes:
    print(f"{a:10.2f} {quote(pool, 'ETH', a) / a:10.3f} {quote(curve, 'ETH', a) / a:11.3f}")

# equal weights give the same curve as the pool; only the fee differs: 0.1%
# taken twice undercuts 0.3% once, until the compounding shows at large size
