"""Special functions used by the pricing formula and the transition density.

The regularized upper incomplete gamma ``G(alpha, nu)`` and the modified
Bessel function ``I_lambda`` are implemented here directly (power series,
Lentz continued fraction, Hankel asymptotics). Everything works on scalars;
the pricer only needs a handful of anchor values and recurs from there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "SpecFunConfig",
    "ConvergenceError",
    "log_gamma",
    "log_gamma_array",
    "log_poisson_weight",
    "upper_gamma_q",
    "lower_gamma_p",
    "log_bessel_i",
    "bessel_i",
]


class ConvergenceError(ArithmeticError):
    """An iterative evaluation did not converge.

    ``partial`` holds the last iterate so callers can decide whether it is
    usable.
    """

    def __init__(self, message: str, partial: float = math.nan):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class SpecFunConfig:
    abs_tol: float = 1e-12
    max_terms: int = 10000

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


_DEFAULT = SpecFunConfig()
_EPS = np.finfo(float).eps


def log_gamma(alpha: float) -> float:
    """ln Gamma(alpha) for alpha > 0."""
    alpha = float(alpha)
    if not (math.isfinite(alpha) and alpha > 0):
        raise ValueError(f"log_gamma needs a finite positive argument, got {alpha!r}")
    return math.lgamma(alpha)


def log_gamma_array(alpha):
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~np.isfinite(alpha)) or np.any(alpha <= 0):
        raise ValueError("log_gamma_array needs finite positive arguments")
    return gammaln(alpha)


# Bernoulli coefficients of the asymptotic lgamma expansion, in powers of 1/alpha^2
_STIRLING = (1.0 / 12, -1.0 / 360, 1.0 / 1260, -1.0 / 1680, 1.0 / 1188, -691.0 / 360360, 1.0 / 156)


def _log1pmx(d: float) -> float:
    """log(1 + d) - d without cancellation for small d."""
    if abs(d) > 0.3:
        return math.log1p(d) - d
    # -d^2/2 + d^3/3 - ...
    total = 0.0
    power = d
    for k in range(2, 200):
        power *= -d
        term = power / k
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return total


def _stirling_tail(alpha: float) -> float:
    """lgamma(alpha) - [(alpha - 1/2) log(alpha) - alpha + log(2 pi)/2]."""
    if alpha < 10.0:
        return math.lgamma(alpha) - ((alpha - 0.5) * math.log(alpha) - alpha + 0.5 * math.log(2.0 * math.pi))
    return float(_stirling_series(alpha))


def _stirling_series(alpha):
    inv2 = 1.0 / (alpha * alpha)
    poly = 0.0
    for c in _STIRLING[::-1]:
        poly = c + inv2 * poly
    return poly / alpha


def _log_gamma_prefactor(alpha: float, nu: float) -> float:
    """alpha log(nu) - nu - lgamma(alpha), accurate when alpha and nu are both large."""
    if alpha < 10.0:
        return alpha * math.log(nu) - nu - math.lgamma(alpha)
    d = nu / alpha - 1.0
    if abs(d) <= 0.3:
        dev = alpha * _log1pmx(d)
    else:
        # logs taken separately: nu / alpha may round to 0 or overflow
        dev = alpha * (math.log(nu) - math.log(alpha)) - (nu - alpha)
    return (dev + 0.5 * math.log(alpha)
            - 0.5 * math.log(2.0 * math.pi) - _stirling_tail(alpha))


def _scaled_log1pmx_array(alpha: np.ndarray, lam: float) -> np.ndarray:
    """``alpha (log(lam/alpha) - (lam/alpha - 1))``."""
    d = lam / alpha - 1.0
    out = alpha * (math.log(lam) - np.log(alpha)) - (lam - alpha)
    small = np.abs(d) <= 0.3
    if np.any(small):
        ds = d[small]
        total = np.zeros_like(ds)
        power = ds.copy()
        for k in range(2, 64):
            power *= -ds
            total += power / k
        out[small] = alpha[small] * total
    return out


def log_poisson_weight(m, lam: float) -> np.ndarray:
    """``m log(lam) - lam - lgamma(m + 1)`` for real ``m >= 0``.

    Written as a Stirling remainder plus a deviance term, so the result keeps
    its relative accuracy when ``m`` and ``lam`` are large and close.
    """
    m = np.asarray(m, dtype=float)
    if not lam > 0:
        raise ValueError("log_poisson_weight needs lam > 0")
    alpha = np.atleast_1d(m + 1.0)
    out = np.empty_like(alpha)
    small = alpha < 10.0
    out[small] = alpha[small] * math.log(lam) - lam - gammaln(alpha[small])
    big = ~small
    if np.any(big):
        ab = alpha[big]
        tail = _stirling_series(ab)
        out[big] = (_scaled_log1pmx_array(ab, lam) + 0.5 * np.log(ab)
                    - 0.5 * math.log(2.0 * math.pi) - tail)
    out -= math.log(lam)
    return out.reshape(m.shape) if m.ndim else out[0]


def _lower_series(alpha: float, nu: float, cfg: SpecFunConfig) -> float:
    # P(alpha, nu) = nu^alpha e^-nu / Gamma(alpha+1) * sum_k nu^k / ((alpha+1)...(alpha+k))
    term = 1.0
    total = 1.0
    for k in range(1, cfg.max_terms + 1):
        term *= nu / (alpha + k)
        total += term
        if term < total * _EPS:
            break
    else:
        raise ConvergenceError("lower incomplete gamma series did not converge", total)
    log_pref = _log_gamma_prefactor(alpha, nu) - math.log(alpha)
    return math.exp(log_pref) * total


def _upper_cf(alpha: float, nu: float, cfg: SpecFunConfig) -> float:
    # modified Lentz on the Legendre continued fraction for Gamma(alpha, nu)
    tiny = 1e-300
    b = nu + 1.0 - alpha
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, cfg.max_terms + 1):
        an = -i * (i - alpha)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ConvergenceError("incomplete gamma continued fraction did not converge", h)
    return math.exp(_log_gamma_prefactor(alpha, nu)) * h


def upper_gamma_q(alpha: float, nu: float, cfg: SpecFunConfig = _DEFAULT) -> float:
    """Regularized upper incomplete gamma ``G(alpha, nu)``.

    Uses the power series of the complementary function below
    ``nu = alpha + 1`` and a continued fraction above it.

    Raises:
        ValueError: ``alpha <= 0``, ``nu < 0`` or non-finite input.
        ConvergenceError: more than ``cfg.max_terms`` iterations needed.
    """
    alpha = float(alpha)
    nu = float(nu)
    if not (math.isfinite(alpha) and alpha > 0):
        raise ValueError(f"alpha must be finite and positive, got {alpha!r}")
    if math.isnan(nu) or nu < 0:
        raise ValueError(f"nu must be non-negative, got {nu!r}")
    if nu == 0.0:
        return 1.0
    if math.isinf(nu):
        return 0.0
    if nu < alpha + 1.0:
        q = 1.0 - _lower_series(alpha, nu, cfg)
    else:
        q = _upper_cf(alpha, nu, cfg)
    return min(max(q, 0.0), 1.0)


def lower_gamma_p(alpha: float, nu: float, cfg: SpecFunConfig = _DEFAULT) -> float:
    """Regularized lower incomplete gamma ``1 - G(alpha, nu)``, computed
    directly below ``nu = alpha + 1`` so that small values keep full relative
    accuracy."""
    alpha = float(alpha)
    nu = float(nu)
    if not (math.isfinite(alpha) and alpha > 0):
        raise ValueError(f"alpha must be finite and positive, got {alpha!r}")
    if math.isnan(nu) or nu < 0:
        raise ValueError(f"nu must be non-negative, got {nu!r}")
    if nu == 0.0:
        return 0.0
    if math.isinf(nu):
        return 1.0
    if nu < alpha + 1.0:
        p = _lower_series(alpha, nu, cfg)
    else:
        p = 1.0 - _upper_cf(alpha, nu, cfg)
    return min(max(p, 0.0), 1.0)


def _log_bessel_series(lam: float, z: float, cfg: SpecFunConfig) -> float:
    # all terms positive; sum relative to the largest one
    q = 0.25 * z * z
    kmax = max(cfg.max_terms, int(2 * z) + 50)
    k_peak = int(max(0.0, 0.5 * (-lam + math.sqrt(lam * lam + 4.0 * q))))
    log_peak = (2 * k_peak + lam) * math.log(0.5 * z) - math.lgamma(k_peak + 1.0) - math.lgamma(k_peak + 1.0 + lam)
    total = 1.0
    term = 1.0
    for k in range(k_peak + 1, k_peak + kmax):
        term *= q / (k * (k + lam))
        total += term
        if term < total * _EPS:
            break
    else:
        raise ConvergenceError("Bessel series did not converge", log_peak + math.log(total))
    term = 1.0
    for k in range(k_peak, 0, -1):
        term *= k * (k + lam) / q
        total += term
        if term < total * _EPS:
            break
    return log_peak + math.log(total)


def _log_bessel_hankel(lam: float, z: float) -> float | None:
    # large-z expansion; None if the smallest term is not negligible
    mu = 4.0 * lam * lam
    term = 1.0
    total = 1.0
    prev = math.inf
    for k in range(1, 200):
        term *= -(mu - (2 * k - 1) ** 2) / (k * 8.0 * z)
        if abs(term) >= prev:
            return None
        total += term
        prev = abs(term)
        if prev < 1e-16 * abs(total):
            return z - 0.5 * math.log(2.0 * math.pi * z) + math.log(total)
    return None


def log_bessel_i(lam: float, z: float, cfg: SpecFunConfig = _DEFAULT) -> float:
    """Natural log of the modified Bessel function ``I_lam(z)``.

    ``I_lam(z) = sum_k (z/2)^(2k+lam) / (k! Gamma(k+1+lam))``. Returns -inf at
    ``z = 0`` for ``lam > 0``.
    """
    lam = float(lam)
    z = float(z)
    if not (math.isfinite(lam) and lam >= 0):
        raise ValueError(f"order must be finite and >= 0, got {lam!r}")
    if math.isnan(z) or z < 0:
        raise ValueError(f"argument must be >= 0, got {z!r}")
    if z == 0.0:
        return 0.0 if lam == 0.0 else -math.inf
    if math.isinf(z):
        return math.inf
    if z > 25.0 + lam * lam:
        val = _log_bessel_hankel(lam, z)
        if val is not None:
            return val
    return _log_bessel_series(lam, z, cfg)


def bessel_i(lam: float, z: float, cfg: SpecFunConfig = _DEFAULT) -> float:
    """``I_lam(z)`` in the linear domain.

    Raises OverflowError when the value does not fit in a double; use
    :func:`log_bessel_i` there.
    """
    lv = log_bessel_i(lam, z, cfg)
    if lv > 709.78:
        raise OverflowError(f"I_{lam}({z}) overflows; use log_bessel_i")
    return math.exp(lv)
