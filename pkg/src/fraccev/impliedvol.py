"""Lognormal implied volatility and strike-skew reports."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from scipy.stats import norm

from .black import bs_price
from .engines import EngineConfigs, run_engine
from .model import ContractSpec, ModelParams

__all__ = ["bs_price", "bs_vega", "InversionError", "implied_vol", "SkewRow", "skew_report",
           "is_strictly_decreasing", "skew_csv"]


class InversionError(ValueError):
    """Price outside the no-arbitrage band; ``bound`` is "intrinsic" or "upper"."""

    def __init__(self, msg, bound):
        super().__init__(msg)
        self.bound = bound


def bs_vega(spot, strike, r, delta, sigma, tau):
    fwd = spot * math.exp((r - delta) * tau)
    std = sigma * math.sqrt(tau)
    d1 = math.log(fwd / strike) / std + 0.5 * std
    return spot * math.exp(-delta * tau) * norm.pdf(d1) * math.sqrt(tau)


def implied_vol(price: float, spot: float, strike: float, r: float, delta: float, tau: float,
                kind: str = "call", max_iter: int = 200) -> float:
    """Volatility ``s`` with ``bs_price(s) = price``.

    The out-of-the-money side (switched through parity) is solved in log-price,
    so tiny time values keep their relative accuracy. Newton steps are kept
    inside a bracket and replaced by bisection when they leave it.
    """
    if not (spot > 0 and tau > 0 and strike > 0):
        raise ValueError("spot, strike and tau must be positive")
    df_s = spot * math.exp(-delta * tau)
    df_k = strike * math.exp(-r * tau)
    if kind == "call":
        lower, upper = max(df_s - df_k, 0.0), df_s
    elif kind == "put":
        lower, upper = max(df_k - df_s, 0.0), df_k
    else:
        raise ValueError(f"kind must be 'call' or 'put', got {kind!r}")
    if not price > lower:
        raise InversionError(f"price {price!r} at or below the intrinsic bound {lower!r}", "intrinsic")
    if not price < upper:
        raise InversionError(f"price {price!r} at or above the upper bound {upper!r}", "upper")

    # time value of the out-of-the-money option
    otm = "call" if df_s <= df_k else "put"
    tv = price if otm == kind else price - (df_s - df_k if kind == "call" else df_k - df_s)
    if not tv > 0:
        raise InversionError(f"time value {tv!r} lost to rounding at the intrinsic bound", "intrinsic")
    target = math.log(tv)

    def g(s):
        p = bs_price(spot, strike, r, delta, s, tau, otm)
        return (math.log(p) if p > 0 else -math.inf), p

    lo, hi = 0.0, 1.0
    while g(hi)[0] < target:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            raise InversionError("no volatility reaches the price", "upper")
    s = 0.5 * (lo + hi)
    for _ in range(max_iter):
        val, p = g(s)
        diff = val - target
        if diff == 0.0:
            break
        if diff < 0:
            lo = s
        else:
            hi = s
        vega = bs_vega(spot, strike, r, delta, s, tau)
        step = diff * p / vega if vega > 0 and p > 0 else math.inf
        nxt = s - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - s) <= 1e-15 * s or hi - lo <= 4e-16 * hi:
            s = nxt
            break
        s = nxt
    resid = abs(bs_price(spot, strike, r, delta, s, tau, kind) - price)
    if resid > 1e-10 * spot:
        raise ArithmeticError(f"implied vol did not converge (residual {resid:.3e})")
    return float(s)


@dataclass
class SkewRow:
    strike: float
    model_price: float
    implied_vol: float
    engine: str
    status: str = "ok"


def skew_report(params: ModelParams, strikes, t0: float = 0.0, maturity: float = 1.0,
                engine: str = "series", cfg: EngineConfigs = EngineConfigs()) -> list[SkewRow]:
    """Price each strike, invert to lognormal vol; failures stay in their row.

    Strikes below the forward are priced and inverted as puts, where the
    time value is not swamped by intrinsic value; the row still reports the
    call price (by parity).
    """
    ks = list(strikes)
    if any(k <= 0 for k in ks) or ks != sorted(ks):
        raise ValueError("strikes must be positive and sorted")
    tau = maturity - t0
    df_s = params.x0 * math.exp(-params.delta * tau)
    rows = []
    for k in ks:
        df_k = k * math.exp(-params.r * tau)
        kind = "put" if df_k < df_s and engine != "quadrature" else "call"
        contract = ContractSpec(strike=k, maturity=maturity, t0=t0, kind=kind)
        try:
            p = run_engine(engine, params, contract, cfg).price
        except Exception as exc:  # noqa: BLE001 - reported in the row
            rows.append(SkewRow(k, math.nan, math.nan, engine, f"price_error: {exc}"))
            continue
        call = p if kind == "call" else p + df_s - df_k
        try:
            iv = implied_vol(p, params.x0, k, params.r, params.delta, tau, kind)
            rows.append(SkewRow(k, call, iv, engine))
        except InversionError as exc:
            rows.append(SkewRow(k, call, math.nan, engine, f"inversion_error: {exc.bound}"))
        except ArithmeticError as exc:
            rows.append(SkewRow(k, call, math.nan, engine, f"inversion_error: {exc}"))
    return rows


def is_strictly_decreasing(rows) -> bool:
    vols = [r.implied_vol for r in rows]
    if any(r.status != "ok" for r in rows):
        return False
    return all(a > b for a, b in zip(vols, vols[1:]))


def skew_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["strike", "price", "implied_vol", "engine", "status"])
    for r in rows:
        w.writerow([f"{r.strike:.12g}", f"{r.model_price:.12g}", f"{r.implied_vol:.12g}", r.engine, r.status])
    return buf.getvalue()
