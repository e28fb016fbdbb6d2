"""Memory coefficients of the fractional CEV model.

With ``h(t) = exp(-eta t)`` the correction coefficient reduces to

    C(t) = H (2H - 1) * int_0^t exp(eta u) u^(2H-2) du,

which equals ``H t^(2H-1)`` when ``eta = 0`` and tends to 1/2 as H -> 1/2.
The pricing clock is ``gamma_t = int_{t0}^t exp(-b tau) C(tau) dtau``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy import integrate

if TYPE_CHECKING:
    from .model import ContractSpec, ModelParams

__all__ = [
    "ETA_MODES",
    "KernelConfig",
    "DerivedCoeffs",
    "eta_for",
    "derive_coeffs",
    "h_of_t",
    "c_of_t",
    "c_of_t_array",
    "gamma_clock",
]

ETA_MODES = ("risk_neutral_r_minus_delta", "real_world_mu", "explicit_value")


@dataclass(frozen=True)
class KernelConfig:
    quad_tol: float = 1e-10
    eta_mode: str = "risk_neutral_r_minus_delta"
    eta_value: float | None = None  # only read in explicit_value mode

    def __post_init__(self):
        if not self.quad_tol > 0:
            raise ValueError("quad_tol must be positive")
        if self.eta_mode not in ETA_MODES:
            raise ValueError(f"eta_mode must be one of {ETA_MODES}, got {self.eta_mode!r}")
        if self.eta_mode == "explicit_value" and self.eta_value is None:
            raise ValueError("explicit_value mode needs eta_value")


@dataclass(frozen=True)
class DerivedCoeffs:
    """Constants of the transformed diffusion ``dY = (bY + cC) dt + sqrt(2aCY) dB``.

    ``x`` is the discounted transformed spot ``exp(-b t0) X0^(2-beta)``.
    """

    a: float
    b: float
    c: float
    eta: float
    x: float

    @property
    def order(self) -> float:
        """Bessel order ``1 - c/a``, equal to ``1/(2 - beta)``."""
        return 1.0 - self.c / self.a if self.a > 0 else math.nan


def eta_for(params: ModelParams, cfg: KernelConfig) -> float:
    """Exponential rate of ``h``: ``(1 - beta/2) * drift`` for the chosen drift."""
    if cfg.eta_mode == "explicit_value":
        return float(cfg.eta_value)
    drift = params.mu if cfg.eta_mode == "real_world_mu" else params.r - params.delta
    return (1.0 - 0.5 * params.beta) * drift


def derive_coeffs(params: ModelParams, contract: ContractSpec, cfg: KernelConfig = KernelConfig(),
                  allow_zero_sigma: bool = False) -> DerivedCoeffs:
    beta = params.beta
    if beta >= 2.0:
        raise ValueError("beta = 2 has no transformed diffusion; use the Black-Scholes branch")
    if not 0.0 <= beta:
        raise ValueError(f"beta must lie in [0, 2), got {beta}")
    if not (params.sigma > 0 or allow_zero_sigma and params.sigma == 0):
        raise ValueError("sigma must be positive")
    if not params.x0 > 0:
        raise ValueError("x0 must be positive")
    s2 = params.sigma ** 2
    two_b = 2.0 - beta
    a = s2 * two_b ** 2
    b = (params.r - params.delta) * two_b
    c = s2 * two_b * (1.0 - beta)
    x = math.exp(-b * contract.t0) * params.x0 ** two_b
    return DerivedCoeffs(a=a, b=b, c=c, eta=eta_for(params, cfg), x=x)


def h_of_t(eta: float, t: float) -> float:
    return math.exp(-eta * t)


def _check_hurst(H: float) -> None:
    if not 0.5 <= H < 1.0:
        raise ValueError(f"Hurst parameter must lie in [1/2, 1), got {H}")


def c_of_t(H: float, eta: float, t: float, cfg: KernelConfig = KernelConfig()) -> float:
    """Memory coefficient ``C(t)``; exactly 1/2 at ``H = 1/2``."""
    _check_hurst(H)
    if not t > 0:
        raise ValueError(f"C(t) needs t > 0, got {t}")
    if H == 0.5:
        return 0.5
    p = 2.0 * H - 1.0
    # int_0^t e^{eta u} u^{p-1} du = t^p / p + int_0^t expm1(eta u) u^{p-1} du,
    # the remainder has a bounded integrand handled by the algebraic weight
    base = H * t ** p
    if eta == 0.0:
        return base
    rem, _ = integrate.quad(
        lambda u: math.expm1(eta * u) / u if u > 0 else eta,
        0.0, t, weight="alg", wvar=(p, 0.0),
        epsabs=cfg.quad_tol * 1e-2, epsrel=1e-13, limit=200,
    )
    return base + H * p * rem


def c_of_t_array(H: float, eta: float, times, cfg: KernelConfig = KernelConfig()) -> np.ndarray:
    return np.array([c_of_t(H, eta, float(t), cfg) for t in np.asarray(times, dtype=float).ravel()])


def _discount_integral(b: float, m: float, t: float) -> float:
    # int_m^t exp(-b tau) dtau
    x = b * (t - m)
    if abs(x) < 1e-8:
        # also covers b so small that b * (t - m) underflows
        return math.exp(-b * m) * (t - m) * (1.0 - 0.5 * x + x * x / 6.0)
    return -math.exp(-b * m) * math.expm1(-x) / b


def gamma_clock(coeffs: DerivedCoeffs, H: float, t0: float, t: float, cfg: KernelConfig = KernelConfig()) -> float:
    """Clock ``gamma_t = int_{t0}^t exp(-b tau) C(tau) dtau``.

    For H > 1/2 the double integral is collapsed by swapping the order of
    integration, leaving one integral with an algebraic endpoint weight.
    """
    _check_hurst(H)
    if t0 < 0:
        raise ValueError("t0 must be non-negative")
    if t < t0:
        raise ValueError(f"clock needs t >= t0, got t={t}, t0={t0}")
    if t == t0:
        return 0.0
    b, eta = coeffs.b, coeffs.eta
    if H == 0.5:
        return 0.5 * _discount_integral(b, t0, t)
    p = 2.0 * H - 1.0

    def inner(u):
        return math.exp(eta * u) * _discount_integral(b, u, t)

    def j(s):
        if s == 0.0:
            return 0.0
        val, _ = integrate.quad(inner, 0.0, s, weight="alg", wvar=(p - 1.0, 0.0),
                                epsabs=cfg.quad_tol * 1e-2, epsrel=1e-13, limit=200)
        return val

    head = c_of_t(H, eta, t0, cfg) * _discount_integral(b, t0, t) if t0 > 0 else 0.0
    return head + H * p * (j(t) - j(t0))
