"""Stock paths driven by fractional Brownian motion.

Draws paths on a coarse grid and compares the sample covariance of the
driving Gaussian process with s^2H + t^2H - |t - s|^2H over two.
"""
import numpy as np

from fraccev import McConfig, ModelParams, simulate_stock_paths_gaussian

H = 0.8
times = np.linspace(0.0, 1.0, 6)
params = ModelParams(sigma=0.2, beta=1.0, H=H, mu=0.0, x0=100.0)
paths, y = simulate_stock_paths_gaussian(params, times, McConfig(n_paths=20_000), return_gaussian=True)

s, t = np.meshgrid(times[1:], times[1:], indexing="ij")
target = 0.5 * (s ** (2 * H) + t ** (2 * H) - np.abs(s - t) ** (2 * H))
emp = y[:, 1:].T @ y[:, 1:] / y.shape[0]
print("max |sample - exact| covariance:", float(np.abs(emp - target).max()))
print("mean stock at maturity:", float(paths.values[:, -1].mean()))
