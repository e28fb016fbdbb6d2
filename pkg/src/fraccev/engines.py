"""Name-based dispatch over the pricing engines."""
from __future__ import annotations

from dataclasses import dataclass, field

from .density import price_call_quadrature
from .kernel import KernelConfig
from .model import ContractSpec, ModelParams
from .montecarlo import McConfig, price_call_mc
from .pde import PdeGrid, price_call_pde
from .pricer import ENGINES, PriceResult, SeriesConfig, price, price_black_scholes_branch

__all__ = ["EngineConfigs", "run_engine"]


@dataclass(frozen=True)
class EngineConfigs:
    series: SeriesConfig = field(default_factory=SeriesConfig)
    pde: PdeGrid = field(default_factory=PdeGrid)
    mc: McConfig = field(default_factory=McConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    quad_tol: float = 1e-10


def run_engine(engine: str, params: ModelParams, contract: ContractSpec,
               cfg: EngineConfigs = EngineConfigs()) -> PriceResult:
    """Price ``contract`` with the named engine.

    ``series`` falls back to the lognormal closed form at ``beta = 2`` and to
    parity for puts. The other engines price calls and puts directly, except
    ``quadrature`` which is call-only.
    """
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    if engine == "series":
        return price(params, contract, cfg.series, cfg.kernel)
    if engine == "black_scholes":
        return price_black_scholes_branch(params, contract, cfg.kernel)
    if engine == "pde":
        return price_call_pde(params, contract, cfg.pde, cfg.kernel)
    if engine == "mc":
        return price_call_mc(params, contract, cfg.mc, cfg.kernel)
    if contract.kind != "call":
        raise ValueError("quadrature engine prices calls only")
    return price_call_quadrature(params, contract, cfg.quad_tol, cfg.kernel)
