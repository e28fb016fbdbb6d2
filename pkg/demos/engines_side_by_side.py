"""Four engines on one contract.

The series and the density quadrature share the same transition law, the
PDE solves the pricing equation on a grid and Monte Carlo simulates the
transformed process. Agreement between them is the main sanity check.
"""
import time

from fraccev import ContractSpec, McConfig, ModelParams, run_engine
from fraccev.engines import EngineConfigs

params = ModelParams(sigma=0.2, beta=1.0, H=0.75, r=0.05, delta=0.02, x0=100.0)
contract = ContractSpec(strike=100.0, maturity=1.0)
cfg = EngineConfigs(mc=McConfig(n_paths=50_000, n_steps=200))

ref = None
for engine in ("series", "quadrature", "pde", "mc"):
    start = time.perf_counter()
    res = run_engine(engine, params, contract, cfg)
    ref = res.price if ref is None else ref
    print(f"{engine:>10}: {res.price:.8f}  err est {res.error_estimate:.1e}  "
          f"rel gap {abs(res.price - ref) / ref:.1e}  {time.perf_counter() - start:.2f} s")
