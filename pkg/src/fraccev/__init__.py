"""Option pricing under a constant-elasticity-of-variance model driven by
fractional Brownian motion.

Engines: closed-form series, density quadrature, finite differences and
Monte Carlo, plus stock-path simulation and implied-volatility skews.
"""
from .density import density_mass, price_call_quadrature, transition_density
from .engines import EngineConfigs, run_engine
from .impliedvol import SkewRow, bs_price, implied_vol, skew_report
from .kernel import DerivedCoeffs, KernelConfig, c_of_t, derive_coeffs, gamma_clock
from .model import ContractSpec, ModelParams, ValidationError, explicit_g, validate
from .montecarlo import McConfig, PathSet, price_call_mc, simulate_stock_paths_gaussian, simulate_y_paths
from .pde import PdeGrid, price_call_pde, solve_pde
from .pricer import (PriceResult, SeriesConfig, delta, price, price_black_scholes_branch,
                     price_call_series, price_put)

__version__ = "0.1.0"

__all__ = [
    "ContractSpec", "DerivedCoeffs", "EngineConfigs", "KernelConfig", "McConfig", "ModelParams",
    "PathSet", "PdeGrid", "PriceResult", "SeriesConfig", "SkewRow", "ValidationError",
    "bs_price", "c_of_t", "delta", "density_mass", "derive_coeffs", "explicit_g", "gamma_clock",
    "implied_vol", "price", "price_black_scholes_branch", "price_call_mc", "price_call_pde",
    "price_call_quadrature", "price_call_series", "price_put", "run_engine",
    "simulate_stock_paths_gaussian", "simulate_y_paths", "skew_report", "solve_pde",
    "transition_density", "validate",
]
