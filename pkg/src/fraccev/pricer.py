"""Closed-form series price of a European call under the fractional CEV model.

With ``lam = x / (a gamma_T)``, ``y = K^(2-beta) / (a e^(bT) gamma_T)`` and
``nu = 1/(2-beta)``:

    P = e^(-delta tau) X0 sum_n Pois(n; lam) G(n + 1 + nu, y)
        - K e^(-r tau) sum_n e^(-lam) lam^(n+nu) / Gamma(n+1+nu) G(n + 1, y)

Both sums are truncated by explicit Poisson-tail bounds around their modes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from .black import bs_price
from .kernel import DerivedCoeffs, KernelConfig, derive_coeffs, gamma_clock
from .model import ContractSpec, ModelParams, check
from .specfun import ConvergenceError, SpecFunConfig, log_poisson_weight, lower_gamma_p, upper_gamma_q

__all__ = [
    "ENGINES",
    "SeriesConfig",
    "PriceResult",
    "DegenerateClockError",
    "series_terms",
    "price_call_series",
    "price_put_series",
    "price_black_scholes_branch",
    "price_put",
    "price",
    "delta",
]

ENGINES = ("series", "quadrature", "pde", "mc", "black_scholes")
# blocks between exact incomplete-gamma anchors: at least this long, and at
# most eight blocks per run so large Poisson ranges stay cheap
_ANCHOR_STRIDE = 128
_MAX_BLOCKS = 8


class DegenerateClockError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SeriesConfig:
    tail_tol: float = 1e-12
    max_terms: int = 50000
    formula_variant: str = "cox_consistent"

    def __post_init__(self):
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")
        if self.formula_variant not in ("cox_consistent", "as_printed"):
            raise ValueError(f"unknown formula_variant {self.formula_variant!r}")


@dataclass
class PriceResult:
    price: float
    engine: str
    error_estimate: float = 0.0
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"price": self.price, "engine": self.engine,
                "error_estimate": self.error_estimate, **self.meta}


def _log_weight(lam: float, shift: float, n: float) -> float:
    return float(log_poisson_weight(n + shift, lam))


def _shifted_poisson_range(lam: float, shift: float, tol: float, max_terms: int, g_left=None, g_right=None):
    """Index range [lo, hi] of weights ``e^-lam lam^(n+shift) / Gamma(n+1+shift)``
    outside of which the series loses less than ``tol``; also returns the bound.

    Each tail is bounded by the weight tail times the largest factor on that
    side: ``g_left(lo)`` for a factor increasing in n, ``g_right(hi)`` for a
    decreasing one, 1 otherwise.
    """
    mode = max(0, int(math.floor(lam - shift)))
    step = max(16, int(2.0 * math.sqrt(lam + 1.0)))
    g_left = g_left or (lambda n: 1.0)
    g_right = g_right or (lambda n: 1.0)

    def right_bound(hi):
        ratio = lam / (hi + 2.0 + shift)
        if ratio >= 1.0:
            return math.inf
        return math.exp(_log_weight(lam, shift, hi + 1)) / (1.0 - ratio) * g_right(hi + 1)

    def left_bound(lo):
        n = lo - 1
        ratio = (n + shift) / lam
        if ratio >= 1.0:
            return math.inf
        return math.exp(_log_weight(lam, shift, n)) / (1.0 - max(ratio, 0.0)) * g_left(lo)

    hi = mode
    while right_bound(hi) >= 0.5 * tol:
        hi += step
        if hi - mode > max_terms:
            raise ConvergenceError("series right tail did not fall below tolerance", math.nan)
    lo = mode
    while lo > 0 and left_bound(lo) >= 0.5 * tol:
        lo = max(0, lo - step)
    if hi - lo + 1 > max_terms:
        raise ConvergenceError(f"series needs {hi - lo + 1} terms > max_terms={max_terms}", math.nan)
    bound = right_bound(hi) + (left_bound(lo) if lo > 0 else 0.0)
    return lo, hi, bound


def _stride(count: int) -> int:
    return max(_ANCHOR_STRIDE, -(-count // _MAX_BLOCKS))


def _upper_gamma_run(alpha0: float, count: int, y: float, scfg: SpecFunConfig = SpecFunConfig()) -> np.ndarray:
    """G(alpha0 + j, y) for j = 0..count-1 via the upward recurrence
    G(a+1, y) = G(a, y) + e^-y y^a / Gamma(a+1), re-anchored every few terms.
    """
    out = np.empty(count)
    if y == 0.0:
        out[:] = 1.0
        return out
    alphas = alpha0 + np.arange(count)
    inc = np.exp(log_poisson_weight(alphas, y))
    stride = _stride(count)
    for start in range(0, count, stride):
        stop = min(count, start + stride)
        anchor = upper_gamma_q(alphas[start], y, scfg)
        run = np.empty(stop - start)
        run[0] = anchor
        if stop - start > 1:
            run[1:] = anchor + np.cumsum(inc[start:stop - 1])
        out[start:stop] = run
    return np.clip(out, 0.0, 1.0)


def _lower_gamma_run(alpha0: float, count: int, y: float, scfg: SpecFunConfig = SpecFunConfig()) -> np.ndarray:
    """P(alpha0 + j, y) = 1 - G(alpha0 + j, y) for j = 0..count-1.

    Runs the recurrence downward, P(a, y) = P(a+1, y) + e^-y y^a / Gamma(a+1),
    from an anchor at the top of each block, so every step adds positive terms.
    """
    out = np.empty(count)
    if y == 0.0:
        out[:] = 0.0
        return out
    alphas = alpha0 + np.arange(count)
    inc = np.exp(log_poisson_weight(alphas, y))
    stride = _stride(count)
    for start in range(0, count, stride):
        stop = min(count, start + stride)
        anchor = lower_gamma_p(alphas[stop - 1], y, scfg)
        tail = np.cumsum(inc[start:stop - 1][::-1])[::-1]
        out[start:stop - 1] = anchor + tail
        out[stop - 1] = anchor
    return np.clip(out, 0.0, 1.0)


def series_terms(lam: float, nu: float, y: float, cfg: SeriesConfig = SeriesConfig(), tol: float | None = None,
                 side: str = "call"):
    """Weights and incomplete-gamma factors of both sums.

    Returns a dict with index arrays ``n1``/``n2``, weights ``w1``/``w2``,
    factors ``g1``/``g2`` and the tail bounds ``tail1``/``tail2``. ``tol``
    overrides ``cfg.tail_tol`` as the per-sum truncation target. With
    ``side="put"`` the factors are the complements ``1 - G``.
    """
    tol = cfg.tail_tol if tol is None else tol
    # anchors near a large Poisson mode need O(sqrt(lam)) iterations
    scfg = SpecFunConfig(max_terms=max(SpecFunConfig().max_terms, cfg.max_terms))
    if side == "call":
        run = _upper_gamma_run
        bounds = lambda shift: {"g_left": lambda n: upper_gamma_q(n + 1.0 + shift, y, scfg)}
    elif side == "put":
        run = _lower_gamma_run
        bounds = lambda shift: {"g_right": lambda n: lower_gamma_p(n + 1.0 + shift, y, scfg)}
    else:
        raise ValueError(f"side must be 'call' or 'put', got {side!r}")
    lo1, hi1, tail1 = _shifted_poisson_range(lam, 0.0, tol, cfg.max_terms, **bounds(nu))
    n1 = np.arange(lo1, hi1 + 1)
    w1 = np.exp(log_poisson_weight(n1, lam))
    g1 = run(lo1 + 1.0 + nu, n1.size, y, scfg)
    if cfg.formula_variant == "cox_consistent":
        lo2, hi2, tail2 = _shifted_poisson_range(lam, nu, tol, cfg.max_terms, **bounds(0.0))
        n2 = np.arange(lo2, hi2 + 1)
        w2 = np.exp(log_poisson_weight(n2 + nu, lam))
    else:
        # printed statement: 1/Gamma(n + 1 - nu); may be negative or at a pole
        from scipy.special import gammasgn

        lo2, hi2, tail2 = lo1, hi1, math.nan
        n2 = n1.copy()
        arg = n2 + 1.0 - nu
        at_pole = (arg <= 0) & (arg == np.round(arg))
        safe = np.where(at_pole, 1.0, arg)
        w2 = np.where(at_pole, 0.0,
                      gammasgn(safe) * np.exp(-lam + (n2 + nu) * math.log(lam) - gammaln(safe)))
    g2 = run(lo2 + 1.0, n2.size, y, scfg)
    return {"n1": n1, "w1": w1, "g1": g1, "tail1": tail1,
            "n2": n2, "w2": w2, "g2": g2, "tail2": tail2}


def _clock(params, contract, kcfg):
    coeffs = derive_coeffs(params, contract, kcfg)
    gam = gamma_clock(coeffs, params.H, contract.t0, contract.maturity, kcfg)
    if not gam > 0:
        raise DegenerateClockError(f"clock gamma_T = {gam} is not positive")
    return coeffs, gam


def _series_value(params, contract, cfg, kcfg, side):
    if params.beta >= 1.95:
        warnings.warn("beta close to 2 makes the series poorly conditioned; "
                      "consider price_black_scholes_branch", RuntimeWarning, stacklevel=3)
    coeffs, gam = _clock(params, contract, kcfg)
    K = contract.strike
    tau = contract.tau
    fwd_pv = math.exp(-params.delta * tau) * params.x0
    disc_k = K * math.exp(-params.r * tau)
    a, b, nu = coeffs.a, coeffs.b, coeffs.order
    lam = coeffs.x / (a * gam)
    y = K ** (2.0 - params.beta) / (a * math.exp(b * contract.maturity) * gam) if K > 0 else 0.0
    # a put also pays K on absorbed paths
    absorbed = upper_gamma_q(nu, lam) if side == "put" else 0.0
    sign = 1.0 if side == "call" else -1.0

    # truncate relative to the price: deep out-of-the-money values can sit
    # far below tail_tol, and their mass lives in the Poisson tail
    tol = cfg.tail_tol
    for _ in range(8):
        t = series_terms(lam, nu, y, cfg, tol, side)
        s1 = math.fsum(t["w1"] * t["g1"])
        s2 = math.fsum(t["w2"] * t["g2"]) if K > 0 else 0.0
        value = sign * (fwd_pv * s1 - disc_k * (s2 + absorbed))
        err = fwd_pv * t["tail1"] + (disc_k * t["tail2"] if K > 0 else 0.0)
        if cfg.formula_variant != "cox_consistent":
            break
        target = cfg.tail_tol * max(value, 0.0)
        if err <= target:
            break
        new_tol = max(cfg.tail_tol * max(value, 1e-300) / max(fwd_pv, disc_k, 1.0), 1e-300)
        if new_tol >= tol:
            break
        tol = new_tol
    if cfg.formula_variant == "cox_consistent":
        value = max(value, 0.0)
    return PriceResult(
        price=value, engine="series", error_estimate=err,
        meta={"terms_used": int(t["n1"].size + (t["n2"].size if K > 0 else 0)),
              "gamma_T": gam, "lam": lam, "y": y, "variant": cfg.formula_variant},
    )


def price_call_series(params: ModelParams, contract: ContractSpec, cfg: SeriesConfig = SeriesConfig(),
                      kcfg: KernelConfig = KernelConfig()) -> PriceResult:
    check(params, contract)
    return _series_value(params, contract, cfg, kcfg, "call")


def price_put_series(params: ModelParams, contract: ContractSpec, cfg: SeriesConfig = SeriesConfig(),
                     kcfg: KernelConfig = KernelConfig()) -> PriceResult:
    """Put from the complementary sums plus ``K e^(-r tau)`` times the absorbed
    probability ``G(nu, lam)``; avoids the cancellation of parity for
    out-of-the-money puts."""
    check(params, contract)
    if cfg.formula_variant != "cox_consistent":
        raise ValueError("the direct put series needs formula_variant='cox_consistent'")
    return _series_value(params, contract, cfg, kcfg, "put")


def total_variance(params: ModelParams, contract: ContractSpec, kcfg: KernelConfig = KernelConfig()) -> float:
    """``2 sigma^2 int_{t0}^T C(tau) dtau``, the lognormal variance at beta = 2."""
    from .kernel import eta_for

    coeffs = DerivedCoeffs(a=0.0, b=0.0, c=0.0, eta=eta_for(params, kcfg), x=params.x0)
    return 2.0 * params.sigma ** 2 * gamma_clock(coeffs, params.H, contract.t0, contract.maturity, kcfg)


def price_black_scholes_branch(params: ModelParams, contract: ContractSpec,
                               kcfg: KernelConfig = KernelConfig()) -> PriceResult:
    if params.beta != 2.0:
        raise ValueError(f"Black-Scholes branch needs beta = 2, got {params.beta}")
    check(params, contract, allow_bs=True)
    tau = contract.tau
    vol = math.sqrt(total_variance(params, contract, kcfg) / tau)
    p = bs_price(params.x0, contract.strike, params.r, params.delta, vol, tau, contract.kind)
    return PriceResult(price=p, engine="black_scholes", meta={"effective_vol": vol})


def price_put(params: ModelParams, contract: ContractSpec, cfg: SeriesConfig = SeriesConfig(),
              kcfg: KernelConfig = KernelConfig()) -> PriceResult:
    """Put price: direct series, or parity against the call for the
    ``as_printed`` variant."""
    if cfg.formula_variant == "cox_consistent":
        return price_put_series(params, replace(contract, kind="put"), cfg, kcfg)
    call = price_call_series(params, replace(contract, kind="call"), cfg, kcfg)
    tau = contract.tau
    value = call.price - params.x0 * math.exp(-params.delta * tau) + contract.strike * math.exp(-params.r * tau)
    if value < 0:
        if value < -call.error_estimate:
            warnings.warn(f"put parity gave {value:.3e} < 0 beyond the error bound; flooring at 0",
                          RuntimeWarning, stacklevel=2)
        value = 0.0
    return PriceResult(price=value, engine="series", error_estimate=call.error_estimate,
                       meta={**call.meta, "via": "parity"})


def price(params: ModelParams, contract: ContractSpec, cfg: SeriesConfig = SeriesConfig(),
          kcfg: KernelConfig = KernelConfig()) -> PriceResult:
    """Dispatch on beta and option kind for the analytic engines."""
    if params.beta == 2.0:
        return price_black_scholes_branch(params, contract, kcfg)
    if contract.kind == "put":
        return price_put(params, contract, cfg, kcfg)
    return price_call_series(params, contract, cfg, kcfg)


def delta(params: ModelParams, contract: ContractSpec, cfg: SeriesConfig = SeriesConfig(),
          kcfg: KernelConfig = KernelConfig(), bump: float = 1e-4) -> float:
    """Hedge ratio dP/dX0 by central bump-and-reprice."""
    h = bump * params.x0
    up = price(replace(params, x0=params.x0 + h), contract, cfg, kcfg).price
    dn = price(replace(params, x0=params.x0 - h), contract, cfg, kcfg).price
    return (up - dn) / (2.0 * h)
