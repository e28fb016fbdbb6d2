"""Implied volatility skew produced by the elasticity.

With beta < 2 the local volatility falls as the stock rises, so lognormal
implied vol decreases across strikes. beta = 2 is lognormal and flat.
"""
from fraccev import ModelParams, skew_report

strikes = list(range(80, 125, 5))
for beta in (1.0, 1.5, 2.0):
    # sigma chosen so the local vol at X0 = 100 is 20% in every case
    params = ModelParams(sigma=0.2 * 100.0 ** (1 - beta / 2), beta=beta, H=0.75, r=0.05, delta=0.02, x0=100.0)
    rows = skew_report(params, strikes)
    print(f"beta={beta}: " + " ".join(f"{r.implied_vol:.4f}" for r in rows))
