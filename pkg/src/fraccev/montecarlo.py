"""Monte Carlo engines.

Pricing runs on the transformed diffusion ``dY = (bY + cC(t)) dt + sqrt(2aC(t)Y) dB``
with zero as an absorbing state. Stock paths under the real-world dynamics are
drawn from the explicit solution ``X_t = g(t, Y_t)`` with ``Y`` the Gaussian
process ``int_0^t h(s) dB^H_s``.

Random streams are tied to fixed-size blocks of paths (``BLOCK`` paths each),
so results depend only on the seed and the configuration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .kernel import DerivedCoeffs, KernelConfig, c_of_t, derive_coeffs, eta_for, gamma_clock
from .model import ContractSpec, ModelParams, check, explicit_g
from .pricer import PriceResult

__all__ = [
    "BLOCK",
    "McConfig",
    "PathSet",
    "CovarianceError",
    "block_rngs",
    "simulate_y_paths",
    "terminal_y",
    "price_call_mc",
    "fbm_covariance",
    "gaussian_covariance",
    "simulate_stock_paths_gaussian",
]

BLOCK = 4096


class CovarianceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 100_000
    n_steps: int = 500
    seed: int = 20240601
    scheme: str = "euler_full_truncation"

    def __post_init__(self):
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("n_paths and n_steps must be >= 1")
        if self.scheme not in ("euler_full_truncation", "exact_time_change"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass
class PathSet:
    times: np.ndarray
    values: np.ndarray  # (n_paths, n_times)
    absorbed: np.ndarray  # bool per path

    def to_csv_rows(self):
        for i in range(self.values.shape[0]):
            flag = int(self.absorbed[i])
            for t, v in zip(self.times, self.values[i]):
                yield i, t, v, flag


def block_rngs(seed: int, n_paths: int):
    """Yield ``(start, stop, Generator)`` per block of paths."""
    for k, start in enumerate(range(0, n_paths, BLOCK)):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(k,))
        yield start, min(n_paths, start + BLOCK), np.random.Generator(np.random.PCG64(ss))


def _step_coefficients(params, coeffs, times, kcfg):
    """Per step: mean memory coefficient over the step and the clock increment."""
    H = params.H
    flat = DerivedCoeffs(a=coeffs.a, b=0.0, c=coeffs.c, eta=coeffs.eta, x=coeffs.x)
    int_c = np.array([gamma_clock(flat, H, times[0], t, kcfg) for t in times])
    clock = np.array([gamma_clock(coeffs, H, times[0], t, kcfg) for t in times])
    dt = np.diff(times)
    return np.diff(int_c) / dt, np.diff(clock)


def _exact_step(z, rng, a, dclock, order):
    """Advance the discounted state over clock increment ``dclock``.

    Absorbed square-root transition: with lam = z / (a dclock), draw
    E ~ Gamma(order); absorbed if E > lam, else M ~ Poisson(lam - E) and the
    new state is a dclock * Gamma(M + 1).
    """
    lam = z / (a * dclock)
    e0 = rng.gamma(order, size=z.shape)
    alive = (e0 < lam) & (z > 0)
    m = rng.poisson(np.where(alive, lam - e0, 0.0))
    w = rng.gamma(m + 1.0)
    return np.where(alive, a * dclock * w, 0.0)


def _run_block(y0, times, params, coeffs, cfg, c_bar, dclock, rng, n, store):
    a, b, c = coeffs.a, coeffs.b, coeffs.c
    y = np.full(n, y0)
    absorbed = np.zeros(n, dtype=bool)
    out = np.empty((n, times.size)) if store else None
    if store:
        out[:, 0] = y
    for k in range(times.size - 1):
        dt = times[k + 1] - times[k]
        if a == 0.0:
            # no noise: the linear ODE, solved exactly
            y = np.full(n, y0 * math.exp(b * (times[k + 1] - times[0])))
        elif cfg.scheme == "euler_full_truncation":
            zk = rng.standard_normal(n)
            yp = np.maximum(y, 0.0)
            y = y + (b * y + c * c_bar[k]) * dt + np.sqrt(2.0 * a * c_bar[k] * yp * dt) * zk
        else:
            z = np.exp(-b * times[k]) * y
            y = np.exp(b * times[k + 1]) * _exact_step(z, rng, a, dclock[k], coeffs.order)
        hit = (y <= 0.0) | absorbed
        absorbed = hit
        y = np.where(hit, 0.0, y)
        if store:
            out[:, k + 1] = y
    return (out if store else y), absorbed


def _time_grid(contract, cfg):
    if cfg.scheme == "exact_time_change" and cfg.n_steps == 1:
        return np.array([contract.t0, contract.maturity])
    return np.linspace(contract.t0, contract.maturity, cfg.n_steps + 1)


def _prepare(params, contract, cfg, kcfg):
    check(params, contract, allow_zero_sigma=True)
    coeffs = derive_coeffs(params, contract, kcfg, allow_zero_sigma=True)
    times = _time_grid(contract, cfg)
    c_bar, dclock = _step_coefficients(params, coeffs, times, kcfg)
    y0 = params.x0 ** (2.0 - params.beta)
    return coeffs, times, c_bar, dclock, y0


def simulate_y_paths(params: ModelParams, contract: ContractSpec, cfg: McConfig = McConfig(),
                     kcfg: KernelConfig = KernelConfig()) -> PathSet:
    """Full paths of ``Y = X^(2-beta)`` on ``n_steps`` equal steps over ``[t0, T]``."""
    coeffs, times, c_bar, dclock, y0 = _prepare(params, contract, cfg, kcfg)
    values = np.empty((cfg.n_paths, times.size))
    absorbed = np.empty(cfg.n_paths, dtype=bool)
    for start, stop, rng in block_rngs(cfg.seed, cfg.n_paths):
        v, ab = _run_block(y0, times, params, coeffs, cfg, c_bar, dclock, rng, stop - start, True)
        values[start:stop] = v
        absorbed[start:stop] = ab
    return PathSet(times=times, values=values, absorbed=absorbed)


def terminal_y(params: ModelParams, contract: ContractSpec, cfg: McConfig = McConfig(),
               kcfg: KernelConfig = KernelConfig()):
    """``(Y_T, absorbed)`` arrays without storing the paths."""
    coeffs, times, c_bar, dclock, y0 = _prepare(params, contract, cfg, kcfg)
    y_t = np.empty(cfg.n_paths)
    absorbed = np.empty(cfg.n_paths, dtype=bool)
    for start, stop, rng in block_rngs(cfg.seed, cfg.n_paths):
        y_t[start:stop], absorbed[start:stop] = _run_block(
            y0, times, params, coeffs, cfg, c_bar, dclock, rng, stop - start, False)
    return y_t, absorbed


def price_call_mc(params: ModelParams, contract: ContractSpec, cfg: McConfig = McConfig(),
                  kcfg: KernelConfig = KernelConfig()) -> PriceResult:
    """Discounted mean payoff; ``error_estimate`` is the standard error."""
    y_t, absorbed = terminal_y(params, contract, cfg, kcfg)
    x_t = y_t ** (1.0 / (2.0 - params.beta))
    K = contract.strike
    pay = np.maximum(x_t - K, 0.0) if contract.kind == "call" else np.maximum(K - x_t, 0.0)
    disc = math.exp(-params.r * contract.tau)
    n = pay.size
    se = disc * pay.std(ddof=1) / math.sqrt(n) if n > 1 else math.inf
    return PriceResult(price=disc * pay.mean(), engine="mc", error_estimate=se,
                       meta={"n_paths": n, "n_steps": cfg.n_steps, "seed": cfg.seed,
                             "scheme": cfg.scheme, "absorbed_fraction": float(absorbed.mean())})


def fbm_covariance(times, H: float) -> np.ndarray:
    """``(s^2H + t^2H - |t-s|^2H) / 2`` on a grid."""
    t = np.asarray(times, dtype=float)
    s, u = np.meshgrid(t, t, indexing="ij")
    return 0.5 * (s ** (2 * H) + u ** (2 * H) - np.abs(s - u) ** (2 * H))


def gaussian_covariance(times, H: float, eta: float, kcfg: KernelConfig = KernelConfig()) -> np.ndarray:
    """Covariance of ``Y_t = int_0^t e^(-eta s) dB^H_s`` on ``times``.

    Uses ``Var(Y_t - Y_s) = 2 int_s^t e^(-2 eta v) C(v - s) dv`` and the
    polarization identity; closed form when ``eta = 0``.
    """
    t = np.asarray(times, dtype=float)
    if eta == 0.0:
        return fbm_covariance(t, H)

    def incr_var(s, u):
        if u <= s:
            return 0.0
        f = lambda v: math.exp(-2.0 * eta * v) * (c_of_t(H, eta, v - s, kcfg) if v > s else 0.0)
        val, _ = integrate.quad(f, s, u, epsabs=1e-13, epsrel=1e-11, limit=200)
        return 2.0 * val

    var = np.array([incr_var(0.0, ti) for ti in t])
    n = t.size
    cov = np.empty((n, n))
    for i in range(n):
        cov[i, i] = var[i]
        for j in range(i + 1, n):
            cov[i, j] = cov[j, i] = 0.5 * (var[i] + var[j] - incr_var(t[i], t[j]))
    return cov


def _sqrt_factor(cov: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(cov)
    scale = max(float(np.max(np.abs(w))), 1e-300)
    if w.min() < -1e-8 * scale:
        jitter = 1e-12 * scale
        while w.min() < -1e-8 * scale and jitter < 1e-6 * scale:
            w, v = np.linalg.eigh(cov + jitter * np.eye(cov.shape[0]))
            jitter *= 10.0
        if w.min() < -1e-8 * scale:
            raise CovarianceError(f"covariance not positive semidefinite (min eigenvalue {w.min():.3e})")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def simulate_stock_paths_gaussian(params: ModelParams, times, cfg: McConfig = McConfig(),
                                  kcfg: KernelConfig = KernelConfig(eta_mode="real_world_mu"),
                                  return_gaussian: bool = False):
    """Stock paths ``X_t = g(t, Y_t)`` on ``times`` (strictly increasing, from 0).

    Returns a :class:`PathSet` of prices; with ``return_gaussian`` also the
    underlying ``Y`` matrix. A path that reaches zero stays there.
    """
    check(params, allow_zero_sigma=True)
    if params.beta >= 2.0:
        raise ValueError("stock path simulation requires beta < 2")
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing and start at 0")
    eta = eta_for(params, kcfg)
    root = _sqrt_factor(gaussian_covariance(t[1:], params.H, eta, kcfg))
    y = np.zeros((cfg.n_paths, t.size))
    for start, stop, rng in block_rngs(cfg.seed, cfg.n_paths):
        z = rng.standard_normal((stop - start, t.size - 1))
        y[start:stop, 1:] = z @ root
    x = np.empty_like(y)
    for j, tj in enumerate(t):
        x[:, j] = explicit_g(params, float(tj), y[:, j], kcfg)
    dead = np.logical_or.accumulate(x <= 0.0, axis=1)
    x[dead] = 0.0
    paths = PathSet(times=t, values=x, absorbed=dead[:, -1])
    return (paths, y) if return_gaussian else paths
