"""Lognormal (Black-Scholes-Merton) closed form."""
from __future__ import annotations

import math

from scipy.stats import norm


def bs_price(spot: float, strike: float, r: float, delta: float, sigma: float, tau: float, kind: str = "call") -> float:
    """Black-Scholes-Merton price with continuous dividend yield ``delta``.

    ``sigma = 0`` gives the discounted intrinsic value on the forward.
    """
    if not (spot > 0 and tau > 0):
        raise ValueError("spot and tau must be positive")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if kind not in ("call", "put"):
        raise ValueError(f"kind must be 'call' or 'put', got {kind!r}")
    cp = 1.0 if kind == "call" else -1.0
    df = math.exp(-r * tau)
    fwd = spot * math.exp((r - delta) * tau)
    std = sigma * math.sqrt(tau)
    if strike <= 0:
        return max(cp * (fwd - strike), 0.0) * df
    if std == 0.0:
        return df * max(cp * (fwd - strike), 0.0)
    d1 = math.log(fwd / strike) / std + 0.5 * std
    d2 = d1 - std
    return cp * df * (fwd * norm.cdf(cp * d1) - strike * norm.cdf(cp * d2))
