"""Model and contract containers plus the explicit strong solution.

The stock is ``X_t = g(t, Y_t)`` with ``Y_t = int_0^t h(s) dB^H_s`` and ``g``
defined through ``a(g(t, y)) = y / h(t) + a(X0) / h(t)`` where
``a(x) = x^(1-beta/2) / (sigma (1 - beta/2))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernel import KernelConfig, eta_for, h_of_t

__all__ = [
    "ModelParams",
    "ContractSpec",
    "ValidationError",
    "validate",
    "check",
    "a_transform",
    "explicit_g",
    "drift_mu",
]


@dataclass(frozen=True)
class ModelParams:
    """Market and model constants.

    Attributes:
        sigma: volatility scale, > 0.
        beta: elasticity exponent in [0, 2]; 2 is the lognormal case.
        H: Hurst parameter in [1/2, 1).
        mu: real-world drift.
        r: risk-free rate.
        delta: continuous dividend yield, >= 0.
        x0: spot price, > 0.
    """

    sigma: float
    beta: float
    H: float = 0.5
    mu: float = 0.0
    r: float = 0.0
    delta: float = 0.0
    x0: float = 100.0


@dataclass(frozen=True)
class ContractSpec:
    strike: float
    maturity: float
    t0: float = 0.0
    kind: str = "call"

    @property
    def tau(self) -> float:
        return self.maturity - self.t0


class ValidationError(ValueError):
    """Aggregated invariant violations; ``errors`` lists ``(field, message)``."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{f}: {m}" for f, m in self.errors))


def validate(params: ModelParams, contract: ContractSpec | None = None) -> list[tuple[str, str]]:
    """Return every violated invariant as ``(field, message)``; empty if valid.

    ``beta == 2`` is reported with the message "Black-Scholes branch only",
    which callers may treat as a note rather than an error.
    """
    errs = []

    def finite(name, v):
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            errs.append((name, "must be a finite number"))
            return False
        return True

    if finite("sigma", params.sigma) and not params.sigma > 0:
        errs.append(("sigma", "must be positive"))
    if finite("beta", params.beta):
        if not 0.0 <= params.beta <= 2.0:
            errs.append(("beta", "must lie in [0, 2]"))
        elif params.beta == 2.0:
            errs.append(("beta", "Black-Scholes branch only"))
    if finite("H", params.H):
        if params.H < 0.5:
            errs.append(("H", "H below 1/2"))
        elif params.H >= 1.0:
            errs.append(("H", "H must be below 1"))
    finite("mu", params.mu)
    finite("r", params.r)
    if finite("delta", params.delta) and params.delta < 0:
        errs.append(("delta", "must be non-negative"))
    if finite("x0", params.x0) and not params.x0 > 0:
        errs.append(("x0", "must be positive"))
    if contract is not None:
        if finite("strike", contract.strike) and contract.strike < 0:
            errs.append(("strike", "must be non-negative"))
        if finite("t0", contract.t0) and contract.t0 < 0:
            errs.append(("t0", "must be non-negative"))
        if finite("maturity", contract.maturity) and not contract.maturity > contract.t0:
            errs.append(("maturity", "must exceed t0"))
        if contract.kind not in ("call", "put"):
            errs.append(("kind", "must be 'call' or 'put'"))
    return errs


def check(params: ModelParams, contract: ContractSpec | None = None, allow_bs: bool = False,
          allow_zero_sigma: bool = False) -> None:
    """Raise :class:`ValidationError` unless the inputs are usable.

    ``allow_zero_sigma`` admits the noise-free limit, which only the path
    simulators support.
    """
    errs = validate(params, contract)
    if allow_bs:
        errs = [e for e in errs if e[1] != "Black-Scholes branch only"]
    if allow_zero_sigma and params.sigma == 0:
        errs = [e for e in errs if e != ("sigma", "must be positive")]
    if errs:
        raise ValidationError(errs)


def a_transform(params: ModelParams, x: float) -> float:
    """``int dx / (sigma x^(beta/2)) = x^(1-beta/2) / (sigma (1-beta/2))``."""
    if params.beta >= 2.0:
        raise ValueError("a_transform is logarithmic at beta = 2 and not supported")
    if not x > 0:
        raise ValueError("a_transform needs x > 0")
    k = 1.0 - 0.5 * params.beta
    return x ** k / (params.sigma * k)


def explicit_g(params: ModelParams, t: float, y, cfg: KernelConfig = KernelConfig(eta_mode="real_world_mu")):
    """Stock price ``g(t, y)`` of the explicit solution.

    Accepts scalar or array ``y``. A non-positive base means the path has
    been absorbed and maps to 0.
    """
    if params.beta >= 2.0:
        raise ValueError("explicit_g requires beta < 2")
    if t < 0:
        raise ValueError("t must be non-negative")
    k = 1.0 - 0.5 * params.beta
    inv_h = 1.0 / h_of_t(eta_for(params, cfg), t)
    y = np.asarray(y, dtype=float)
    # sigma k (y + a(X0)) / h, written to stay finite at sigma = 0
    base = inv_h * (params.sigma * k * y + params.x0 ** k)
    out = np.where(base > 0, np.maximum(base, 0.0) ** (1.0 / k), 0.0)
    if t == 0:
        # normalization g(0, 0) = X0 holds exactly, not up to rounding
        out = np.where(y == 0, params.x0, out)
    return float(out) if out.ndim == 0 else out


def drift_mu(params: ModelParams, t: float, x: float, C_t: float) -> float:
    """Real-world drift ``mu x + (sigma^2 beta / 2) C(t) x^(beta-1)``."""
    if not x > 0:
        raise ValueError("drift needs x > 0")
    return params.mu * x + 0.5 * params.sigma ** 2 * params.beta * C_t * x ** (params.beta - 1.0)
