"""Finite-difference solver for the pricing equation

    P_t + sigma^2 C(t) X^beta P_XX + (r - delta) X P_X - r P = 0,  P(T, X) = f(X).

The diffusion term carries C(t) instead of the classical 1/2. Crank-Nicolson
in time with Rannacher start-up (implicit half steps) on a sinh-stretched
space grid concentrated at the strike.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .kernel import DerivedCoeffs, KernelConfig, c_of_t, eta_for, gamma_clock
from .model import ContractSpec, ModelParams, check
from .pricer import PriceResult

__all__ = ["PdeGrid", "PdeSolution", "PdeDomainError", "PdeInstabilityError", "space_grid", "refined_grid",
           "solve_pde", "price_call_pde"]


class PdeDomainError(ValueError):
    pass


class PdeInstabilityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PdeGrid:
    """Space-time grid settings.

    ``x_max=None`` means ``6 X0 e^((r-delta) tau)`` (at least ``3 K``).
    ``stretch`` scales the sinh width outside the uniform core, in units of
    the terminal standard deviation of X.

    With ``tail_refine`` the grid is refined for out-of-the-money contracts
    whose forward and strike are ``d`` local standard deviations apart: with
    ``f = max(1, d / 2.2)`` the space count
    grows by ``f^2`` and the time count by ``f``, capped at ``max_space`` and
    ``max_time``. Far out-of-the-money prices are exponentially small and
    their relative accuracy needs this.
    """

    n_space: int = 1200
    n_time: int = 800
    x_min: float = 0.0
    x_max: float | None = None
    stretch: float = 1.0
    rannacher_steps: int = 4
    scheme: str = "crank_nicolson_rannacher"
    richardson: bool = True
    tail_refine: bool = True
    max_space: int = 16000
    max_time: int = 4000

    def __post_init__(self):
        if self.n_space < 3 or self.n_time < 3:
            raise ValueError("n_space and n_time must be >= 3")
        if self.x_min < 0:
            raise ValueError("x_min must be >= 0")
        if self.x_max is not None and not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if self.scheme != "crank_nicolson_rannacher":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.stretch > 0:
            raise ValueError("stretch must be positive")
        if self.max_space < 3 or self.max_time < 3:
            raise ValueError("max_space and max_time must be >= 3")


@dataclass
class PdeSolution:
    x: np.ndarray
    t: np.ndarray
    values: np.ndarray  # shape (len(t), len(x)); row 0 is t0
    result: PriceResult

    def price_at(self, x0: float) -> float:
        return float(CubicSpline(self.x, self.values[0])(x0))

    def delta_at(self, x0: float) -> float:
        return float(CubicSpline(self.x, self.values[0])(x0, 1))

    def to_csv_rows(self):
        for i, t in enumerate(self.t):
            for j, x in enumerate(self.x):
                yield t, x, self.values[i, j]


def space_grid(params: ModelParams, contract: ContractSpec, grid: PdeGrid, kcfg: KernelConfig = KernelConfig()) -> np.ndarray:
    """Nodes with uniform spacing over a core covering both X0 and K (plus
    three local standard deviations) and sinh stretching outside it.

    The map from the uniform computational variable is C2 at the core edges.
    """
    tau = contract.tau
    fwd = params.x0 * math.exp((params.r - params.delta) * tau)
    x_max = grid.x_max if grid.x_max is not None else max(6.0 * fwd, 3.0 * contract.strike)
    K = contract.strike if contract.strike > 0 else params.x0
    # terminal spread of X: local vol sigma x^(beta/2) over 2 * int C
    lo_c, hi_c = min(params.x0, K), max(params.x0, K)
    sd = max(_terminal_sd(params, contract, kcfg, hi_c), 1e-4 * hi_c)
    core_lo = max(grid.x_min, lo_c - 3.0 * sd)
    core_hi = min(x_max, hi_c + 3.0 * sd)
    w = grid.stretch * sd
    # computational coordinate: identity on the core, asinh-compressed outside
    xi_lo = core_lo - w * math.asinh((core_lo - grid.x_min) / w)
    xi_hi = core_hi + w * math.asinh((x_max - core_hi) / w)
    xi = np.linspace(xi_lo, xi_hi, grid.n_space + 1)
    x = np.where(xi < core_lo, core_lo + w * np.sinh((xi - core_lo) / w),
                 np.where(xi > core_hi, core_hi + w * np.sinh((xi - core_hi) / w), xi))
    x[0], x[-1] = grid.x_min, x_max
    return x


def _terminal_sd(params, contract, kcfg, level):
    clock = DerivedCoeffs(a=0.0, b=0.0, c=0.0, eta=eta_for(params, kcfg), x=params.x0)
    var_time = 2.0 * gamma_clock(clock, params.H, contract.t0, contract.maturity, kcfg)
    return params.sigma * level ** (0.5 * params.beta) * math.sqrt(var_time)


def refined_grid(params: ModelParams, contract: ContractSpec, grid: PdeGrid,
                 kcfg: KernelConfig = KernelConfig()) -> PdeGrid:
    """The grid actually used by :func:`solve_pde` (see ``PdeGrid.tail_refine``)."""
    if not grid.tail_refine or contract.strike <= 0:
        return grid
    fwd = params.x0 * math.exp((params.r - params.delta) * contract.tau)
    K = contract.strike
    # in the money the intrinsic part dominates and the base grid suffices
    if (K <= fwd) == (contract.kind == "call"):
        return grid
    sd = max(_terminal_sd(params, contract, kcfg, max(fwd, K)), 1e-12)
    f = max(1.0, abs(K - fwd) / sd / 2.2)
    if f == 1.0:
        return grid
    return replace(grid, n_space=max(grid.n_space, min(int(grid.n_space * f * f), grid.max_space)),
                   n_time=max(grid.n_time, min(int(grid.n_time * f), grid.max_time)))


def _operator(x, A, B, r):
    """Tridiagonal coefficients (lower, diag, upper) of A P_xx + B P_x - r P on
    interior nodes; central differences unless that breaks positivity of the
    off-diagonals, then one-sided in the flow direction."""
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    s = hm + hp
    d2l = 2.0 / (hm * s)
    d2u = 2.0 / (hp * s)
    low = A * d2l - B * hp / (hm * s)
    up = A * d2u + B * hm / (hp * s)
    diag = -A * (d2l + d2u) + B * (hp - hm) / (hm * hp) - r
    bad = (low < 0) | (up < 0)
    if np.any(bad):
        fwd = B > 0
        lw = np.where(fwd, A * d2l, A * d2l - B / hm)
        uw = np.where(fwd, A * d2u + B / hp, A * d2u)
        dw = -A * (d2l + d2u) + np.where(fwd, -B / hp, B / hm) - r
        low = np.where(bad, lw, low)
        up = np.where(bad, uw, up)
        diag = np.where(bad, dw, diag)
    return low, diag, up


def _solve_once(params, contract, grid, payoff, lower_bc, upper_bc, kcfg):
    x = space_grid(params, contract, grid, kcfg)
    t0, T = contract.t0, contract.maturity
    t = np.linspace(t0, T, grid.n_time + 1)
    eta = eta_for(params, kcfg)
    xi = x[1:-1]
    diff_x = params.sigma ** 2 * xi ** params.beta
    conv = (params.r - params.delta) * xi

    # steps run backward from T; Rannacher replaces the first steps by
    # pairs of implicit half steps
    steps = []
    n_ran = min(grid.rannacher_steps, 2 * grid.n_time)
    for k in range(grid.n_time, 0, -1):
        t_hi, t_lo = t[k], t[k - 1]
        done_half = 2 * (grid.n_time - k)
        if done_half < n_ran:
            mid = 0.5 * (t_hi + t_lo)
            steps.append((t_hi, mid, 1.0))
            steps.append((mid, t_lo, 1.0))
        else:
            steps.append((t_hi, t_lo, 0.5))

    values = np.empty((grid.n_time + 1, x.size))
    v = np.asarray(payoff(x), dtype=float)
    values[-1] = v
    k_store = grid.n_time
    for t_hi, t_lo, theta in steps:
        dt = t_hi - t_lo
        tm = 0.5 * (t_hi + t_lo)
        C = c_of_t(params.H, eta, tm, kcfg) if tm > 0 else 0.0
        low, diag, up = _operator(x, C * diff_x, conv, params.r)
        # explicit part
        rhs = v[1:-1].copy()
        if theta < 1.0:
            lv = low * v[:-2] + diag * v[1:-1] + up * v[2:]
            rhs += (1.0 - theta) * dt * lv
        b_lo = lower_bc(t_lo, x[0])
        b_hi = upper_bc(t_lo, x[-1])
        rhs[0] += theta * dt * low[0] * b_lo
        rhs[-1] += theta * dt * up[-1] * b_hi
        ab = np.zeros((3, xi.size))
        ab[0, 1:] = -theta * dt * up[:-1]
        ab[1] = 1.0 - theta * dt * diag
        ab[2, :-1] = -theta * dt * low[1:]
        inner = solve_banded((1, 1), ab, rhs)
        v = np.concatenate(([b_lo], inner, [b_hi]))
        if np.isclose(t_lo, t[k_store - 1], rtol=0, atol=1e-14 * max(1.0, T)):
            k_store -= 1
            values[k_store] = v
    if not np.all(np.isfinite(values)):
        raise PdeInstabilityError(f"non-finite PDE solution on {grid.n_space}x{grid.n_time} grid")
    return x, t, values


def solve_pde(params: ModelParams, contract: ContractSpec, grid: PdeGrid = PdeGrid(),
              payoff: Callable | None = None, kcfg: KernelConfig = KernelConfig()) -> PdeSolution:
    """Solve backward from maturity and read off the value at ``(t0, X0)``.

    Without ``payoff`` the contract's call/put payoff and its asymptotic
    boundary values are used. A custom ``payoff`` gets the discounted
    payoff at ``x_min`` and a zero-curvature condition at ``x_max``.
    """
    check(params, contract, allow_bs=True)
    K = contract.strike
    r, q, T = params.r, params.delta, contract.maturity
    custom = payoff is not None
    if not custom:
        if contract.kind == "call":
            payoff = lambda x: np.maximum(x - K, 0.0)
            lower_bc = lambda t, x: 0.0
            upper_bc = lambda t, x: max(x * math.exp(-q * (T - t)) - K * math.exp(-r * (T - t)), 0.0)
        else:
            payoff = lambda x: np.maximum(K - x, 0.0)
            lower_bc = lambda t, x: max(K * math.exp(-r * (T - t)) - x * math.exp(-q * (T - t)), 0.0)
            upper_bc = lambda t, x: 0.0
    x_hi = grid.x_max if grid.x_max is not None else max(6.0 * params.x0 * math.exp((r - q) * contract.tau), 3.0 * K)
    if params.x0 < grid.x_min:
        raise PdeDomainError(f"X0={params.x0} below the grid's lower bound x_min={grid.x_min}")
    if params.x0 > x_hi:
        raise PdeDomainError(f"X0={params.x0} above the grid's upper bound x_max={x_hi}")
    if custom:
        f = payoff
        lower_bc = lambda t, x: float(f(np.array([x]))[0]) * math.exp(-r * (T - t))
        # zero curvature at the top: the payoff's last linear piece, carried forward
        xs = space_grid(params, contract, grid, kcfg)[-2:]
        fs = np.asarray(f(xs), dtype=float)
        slope = (fs[1] - fs[0]) / (xs[1] - xs[0])
        level = fs[1] - slope * xs[1]
        upper_bc = lambda t, x: level * math.exp(-r * (T - t)) + slope * x * math.exp(-q * (T - t))

    grid = refined_grid(params, contract, grid, kcfg)
    x, t, values = _solve_once(params, contract, grid, payoff, lower_bc, upper_bc, kcfg)
    fine = float(CubicSpline(x, values[0])(params.x0))
    err = 0.0
    meta = {"n_space": grid.n_space, "n_time": grid.n_time}
    if grid.richardson:
        coarse_grid = replace(grid, n_space=max(3, grid.n_space // 2), n_time=max(3, grid.n_time // 2),
                              richardson=False, tail_refine=False)
        xc, _, vc = _solve_once(params, contract, coarse_grid, payoff, lower_bc, upper_bc, kcfg)
        coarse = float(CubicSpline(xc, vc[0])(params.x0))
        err = abs(fine - coarse) / 3.0
        meta["coarse_price"] = coarse
    result = PriceResult(price=fine, engine="pde", error_estimate=err, meta=meta)
    return PdeSolution(x=x, t=t, values=values, result=result)


def price_call_pde(params: ModelParams, contract: ContractSpec, grid: PdeGrid = PdeGrid(),
                   kcfg: KernelConfig = KernelConfig()) -> PriceResult:
    return solve_pde(params, contract, grid, kcfg=kcfg).result
