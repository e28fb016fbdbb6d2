"""Transition density of ``Y = X^(2-beta)`` and a quadrature pricer built on it.

On the clock ``gamma_t`` the discounted state ``z = e^(-bt) Y`` is a square-root
diffusion absorbed at zero, so ``u(t, Y)`` is defective: its mass is
``1 - G(nu, x / (a gamma_t))`` with ``nu = 1/(2-beta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate

from .kernel import DerivedCoeffs, KernelConfig, derive_coeffs, gamma_clock
from .model import ContractSpec, ModelParams, check
from .pricer import DegenerateClockError, PriceResult
from .specfun import log_bessel_i

__all__ = [
    "DensityPoint",
    "QuadratureError",
    "log_transition_density",
    "transition_density",
    "density_mass",
    "transformed_moment",
    "price_call_quadrature",
]


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class DensityPoint:
    t: float
    y: float
    value: float


def _clock(coeffs, H, t0, t, kcfg):
    if not t > t0:
        raise DegenerateClockError("density needs t > t0")
    gam = gamma_clock(coeffs, H, t0, t, kcfg)
    if not gam > 0:
        raise DegenerateClockError(f"clock gamma_t = {gam} is not positive")
    return gam


def _log_u(coeffs: DerivedCoeffs, gam: float, t: float, y: float) -> float:
    a, b, x, nu = coeffs.a, coeffs.b, coeffs.x, coeffs.order
    ebt = math.exp(b * t)
    scale = a * ebt * gam
    arg = 2.0 / (a * gam) * math.sqrt(x * y / ebt)
    return (-math.log(scale) + 0.5 * nu * (math.log(x * ebt) - math.log(y))
            - (y + x * ebt) / scale + log_bessel_i(nu, arg))


def log_transition_density(coeffs: DerivedCoeffs, H: float, t0: float, t: float, y: float,
                           kcfg: KernelConfig = KernelConfig()) -> float:
    if not y > 0:
        raise ValueError("density is defined for y > 0")
    return _log_u(coeffs, _clock(coeffs, H, t0, t, kcfg), t, y)


def transition_density(coeffs: DerivedCoeffs, H: float, t0: float, t: float, y: float,
                       kcfg: KernelConfig = KernelConfig()) -> float:
    """Density ``u(t, y)`` per unit ``Y``, evaluated through its logarithm."""
    return math.exp(log_transition_density(coeffs, H, t0, t, y, kcfg))


def _breakpoints(coeffs, gam, t, lower, hi_extra=40.0):
    # locate the bulk in w = e^{-bt} Y / (a gamma) where the law is close to
    # a noncentral gamma with centre lam and spread sqrt(2 lam)
    lam = coeffs.x / (coeffs.a * gam)
    to_y = coeffs.a * gam * math.exp(coeffs.b * t)
    sd = math.sqrt(2.0 * lam + 1.0)
    pts = [lam - 8 * sd, lam - 3 * sd, lam - sd, lam, lam + sd, lam + 3 * sd, lam + 8 * sd]
    w_hi = lam + hi_extra * sd + 60.0
    w_lo = lower / to_y
    if w_lo > lam + sd:
        # beyond the bulk the log-density falls at rate ~ 1 - sqrt(lam / w)
        decay = 1.0 / max(1.0 - math.sqrt(lam / w_lo), 1e-6)
        pts += [w_lo + decay * k for k in (0.25, 1.0, 4.0, 16.0, 64.0)]
        w_hi = max(w_hi, w_lo + 400.0 * decay)
    pts = sorted({w for w in pts if w_lo < w < w_hi})
    return [w_lo] + pts + [w_hi], to_y


def _integrate(f, coeffs, gam, t, lower, rel_tol):
    edges, to_y = _breakpoints(coeffs, gam, t, lower)
    total = 0.0
    err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = integrate.quad(f, lo * to_y, hi * to_y, epsabs=0.0, epsrel=rel_tol, limit=400)
        total += val
        err += e
    return total, err


def density_mass(coeffs: DerivedCoeffs, H: float, t0: float, t: float,
                 kcfg: KernelConfig = KernelConfig(), rel_tol: float = 1e-11) -> float:
    """``int_0^inf u(t, y) dy``; below one by the probability absorbed at zero."""
    gam = _clock(coeffs, H, t0, t, kcfg)
    val, _ = _integrate(lambda y: math.exp(_log_u(coeffs, gam, t, y)) if y > 0 else _u_at_zero(coeffs, gam, t),
                        coeffs, gam, t, 0.0, rel_tol)
    return val


def _u_at_zero(coeffs, gam, t):
    # limit y -> 0: only the k = 0 Bessel term survives
    a, b, x, nu = coeffs.a, coeffs.b, coeffs.x, coeffs.order
    scale = a * math.exp(b * t) * gam
    lam = x / (a * gam)
    return math.exp(-math.log(scale) + nu * math.log(lam) - lam - math.lgamma(1.0 + nu))


def transformed_moment(coeffs: DerivedCoeffs, H: float, t0: float, t: float, power: float,
                       kcfg: KernelConfig = KernelConfig(), rel_tol: float = 1e-11) -> float:
    """``E[Y_t^power]`` with absorbed paths counted as zero."""
    gam = _clock(coeffs, H, t0, t, kcfg)

    def f(y):
        if y <= 0:
            return 0.0
        return y ** power * math.exp(_log_u(coeffs, gam, t, y))

    val, _ = _integrate(f, coeffs, gam, t, 0.0, rel_tol)
    return val


def price_call_quadrature(params: ModelParams, contract: ContractSpec, quad_tol: float = 1e-10,
                          kcfg: KernelConfig = KernelConfig()) -> PriceResult:
    """``e^(-r tau) int_{K^(2-beta)}^inf (y^nu - K) u(T, y) dy`` by adaptive quadrature."""
    check(params, contract)
    coeffs = derive_coeffs(params, contract, kcfg)
    T = contract.maturity
    gam = _clock(coeffs, params.H, contract.t0, T, kcfg)
    K = contract.strike
    nu = coeffs.order
    lower = K ** (2.0 - params.beta) if K > 0 else 0.0

    def f(y):
        if y <= 0:
            return 0.0
        lu = _log_u(coeffs, gam, T, y)
        return (y ** nu - K) * math.exp(lu)

    try:
        val, err = _integrate(f, coeffs, gam, T, lower, quad_tol)
    except integrate.IntegrationWarning as exc:  # pragma: no cover - only with warnings as errors
        raise QuadratureError(str(exc)) from exc
    disc = math.exp(-params.r * contract.tau)
    return PriceResult(price=max(disc * val, 0.0), engine="quadrature", error_estimate=disc * err,
                       meta={"gamma_T": gam})
