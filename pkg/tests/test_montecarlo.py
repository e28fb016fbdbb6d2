import math

import numpy as np
import pytest

from conftest import desk
from fraccev.kernel import KernelConfig, derive_coeffs, gamma_clock
from fraccev.model import ContractSpec, ModelParams
from fraccev.montecarlo import (BLOCK, CovarianceError, McConfig, _sqrt_factor, fbm_covariance,
                                gaussian_covariance, price_call_mc, simulate_stock_paths_gaussian,
                                simulate_y_paths, terminal_y)
from fraccev.pricer import price_call_series
from fraccev.specfun import upper_gamma_q

ATM = ContractSpec(100.0, 1.0)
SMALL = McConfig(n_paths=20000, n_steps=100, seed=7)


def test_config_validation():
    for kw in ({"n_paths": 0}, {"n_steps": 0}, {"scheme": "milstein"}, {"seed": -1}, {"seed": 2 ** 64}):
        with pytest.raises(ValueError):
            McConfig(**kw)


def test_seed_determinism_and_block_prefix():
    cfg = McConfig(n_paths=BLOCK + 300, n_steps=20, seed=11)
    a = simulate_y_paths(desk(), ATM, cfg)
    b = simulate_y_paths(desk(), ATM, cfg)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.absorbed, b.absorbed)
    # streams belong to blocks, so a smaller run is a prefix of a larger one
    c = simulate_y_paths(desk(), ATM, McConfig(n_paths=BLOCK, n_steps=20, seed=11))
    assert np.array_equal(a.values[:BLOCK], c.values)
    d = simulate_y_paths(desk(), ATM, McConfig(n_paths=BLOCK, n_steps=20, seed=12))
    assert not np.array_equal(c.values, d.values)


def test_zero_sigma_is_exponential():
    p = desk(sigma=0.0)
    paths = simulate_y_paths(p, ContractSpec(100.0, 2.0, t0=0.5), McConfig(n_paths=3, n_steps=10))
    b = (0.05 - 0.02) * 1.0
    expected = 100.0 * np.exp(b * (paths.times - 0.5))
    assert np.allclose(paths.values, expected, rtol=1e-14)
    assert not paths.absorbed.any()


@pytest.mark.parametrize("scheme", ["euler_full_truncation", "exact_time_change"])
def test_mean_for_zero_c(scheme):
    p = ModelParams(sigma=1.0, beta=1.0, H=0.75, r=0.05, delta=0.02, x0=1.0)
    y_t, _ = terminal_y(p, ATM, McConfig(n_paths=40000, n_steps=100, seed=3, scheme=scheme))
    se = y_t.std(ddof=1) / math.sqrt(y_t.size)
    assert abs(y_t.mean() - math.exp(0.03)) < 3 * se


def test_positivity_and_absorption_sticks():
    p = ModelParams(sigma=1.0, beta=0.5, H=0.75, r=0.05, delta=0.02, x0=1.0)
    paths = simulate_y_paths(p, ATM, McConfig(n_paths=3000, n_steps=100, seed=5))
    assert np.all(paths.values >= 0.0)
    assert paths.absorbed.any()
    for row in paths.values[paths.absorbed][:50]:
        first = np.argmax(row == 0.0)
        assert np.all(row[first:] == 0.0)


@pytest.mark.parametrize("scheme", ["euler_full_truncation", "exact_time_change"])
def test_absorption_matches_density_deficit(scheme):
    p = ModelParams(sigma=1.0, beta=1.0, H=0.75, r=0.05, delta=0.02, x0=1.0)
    co = derive_coeffs(p, ATM)
    q = upper_gamma_q(co.order, co.x / (co.a * gamma_clock(co, 0.75, 0.0, 1.0)))
    _, absorbed = terminal_y(p, ATM, McConfig(n_paths=40000, n_steps=200, seed=9, scheme=scheme))
    se = math.sqrt(q * (1 - q) / absorbed.size)
    assert abs(absorbed.mean() - q) < 3 * se


def test_zero_strike_martingale():
    res = price_call_mc(desk(), ContractSpec(0.0, 1.0), SMALL)
    assert abs(res.price - 100 * math.exp(-0.02)) < 3 * res.error_estimate


@pytest.mark.parametrize("H", [0.5, 0.75])
def test_atm_matches_series(H):
    p = desk(H=H)
    res = price_call_mc(p, ATM, SMALL)
    assert abs(res.price - price_call_series(p, ATM).price) < 3 * res.error_estimate
    assert res.meta["seed"] == 7 and 0.0 <= res.meta["absorbed_fraction"] <= 1.0


def test_exact_scheme_matches_series():
    p = desk(beta=0.5, H=0.9)
    res = price_call_mc(p, ATM, McConfig(n_paths=20000, n_steps=1, seed=1, scheme="exact_time_change"))
    assert abs(res.price - price_call_series(p, ATM).price) < 3 * res.error_estimate


def test_standard_error_halves():
    a = price_call_mc(desk(), ATM, McConfig(n_paths=10000, n_steps=50, seed=2)).error_estimate
    b = price_call_mc(desk(), ATM, McConfig(n_paths=20000, n_steps=50, seed=2)).error_estimate
    assert b / a == pytest.approx(1 / math.sqrt(2), rel=0.2)


def test_put_payoff():
    p = desk(H=0.5)
    res = price_call_mc(p, ContractSpec(100.0, 1.0, kind="put"), SMALL)
    assert res.price >= 0.0


def _cov_se(sample, cov):
    n = sample.shape[0]
    d = np.diag(cov)
    return np.sqrt((np.outer(d, d) + cov ** 2) / n)


def test_gaussian_paths_start_at_spot_and_follow_fbm():
    p = ModelParams(sigma=0.2, beta=1.0, H=0.6, mu=0.0, x0=100.0)
    times = np.array([0.0, 0.2, 0.5, 1.0])
    paths, y = simulate_stock_paths_gaussian(p, times, McConfig(n_paths=10000, seed=4), return_gaussian=True)
    assert np.all(paths.values[:, 0] == 100.0)
    target = fbm_covariance(times[1:], 0.6)
    emp = np.cov(y[:, 1:], rowvar=False)
    assert np.all(np.abs(emp - target) < 3 * _cov_se(y, target) + 1e-12)
    assert np.all(paths.values >= 0.0)


def test_brownian_increments_uncorrelated():
    p = ModelParams(sigma=0.2, beta=1.0, H=0.5, x0=100.0)
    times = np.linspace(0.0, 1.0, 6)
    _, y = simulate_stock_paths_gaussian(p, times, McConfig(n_paths=10000, seed=8), return_gaussian=True)
    inc = np.diff(y, axis=1)
    n = inc.shape[0]
    for j in range(inc.shape[1] - 1):
        c = np.mean(inc[:, j] * inc[:, j + 1])
        se = math.sqrt(np.mean((inc[:, j] * inc[:, j + 1]) ** 2) / n)
        assert abs(c) < 3 * se
    var = y[:, -1].var()
    assert var == pytest.approx(1.0, abs=3 * math.sqrt(2 / n))


def test_gaussian_covariance_with_discount_matches_double_integral():
    # H(2H-1) int_0^s int_0^t e^(-eta(u+v)) |u-v|^(2H-2) dv du in 20-digit quadrature,
    # split at the diagonal, for H = 0.8, eta = 0.3, s = 0.4, t = 1
    cov = gaussian_covariance([0.4, 1.0], 0.8, 0.3, KernelConfig())
    assert cov[0, 1] == pytest.approx(0.33092248507607536, rel=1e-9)
    assert cov[0, 0] == pytest.approx(0.20504474963873275, rel=1e-9)


def test_sqrt_factor():
    cov = fbm_covariance([0.1, 0.5, 1.0], 0.7)
    root = _sqrt_factor(cov)
    assert np.allclose(root @ root.T, cov, atol=1e-14)
    with pytest.raises(CovarianceError):
        _sqrt_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_gaussian_input_checks():
    with pytest.raises(ValueError):
        simulate_stock_paths_gaussian(desk(), [0.1, 0.5])
    with pytest.raises(ValueError):
        simulate_stock_paths_gaussian(desk(), [0.0, 0.5, 0.5])


def test_csv_rows():
    paths = simulate_y_paths(desk(), ATM, McConfig(n_paths=2, n_steps=3, seed=1))
    rows = list(paths.to_csv_rows())
    assert len(rows) == 8
    assert rows[0][:2] == (0, 0.0)
