import math
import warnings

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from fraccev.black import bs_price
from fraccev.density import transition_density
from fraccev.impliedvol import implied_vol
from fraccev.kernel import KernelConfig, c_of_t, derive_coeffs, gamma_clock, h_of_t
from fraccev.model import ContractSpec, ModelParams, a_transform, explicit_g
from fraccev.pricer import price_call_series, price_put
from fraccev.specfun import log_poisson_weight, lower_gamma_p, upper_gamma_q

FAST = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

betas = st.floats(0.0, 1.9)
hursts = st.floats(0.5, 0.95)
# local lognormal vol at X0 = 100; sigma follows as vol * X0^(1 - beta/2)
vols = st.floats(0.05, 0.6)
rates = st.floats(0.0, 0.08)
strikes = st.floats(50.0, 160.0)
maturities = st.floats(0.1, 3.0)


def _params(beta, H, vol, r, q, x0=100.0):
    return ModelParams(sigma=vol * 100.0 ** (1 - beta / 2), beta=beta, H=H, r=r, delta=q, x0=x0)


@FAST
@given(beta=betas, H=hursts, vol=vols, r=rates, q=rates, K=strikes, T=maturities)
def test_call_within_no_arbitrage_bounds(beta, H, vol, r, q, K, T):
    p = _params(beta, H, vol, r, q)
    v = price_call_series(p, ContractSpec(K, T)).price
    lo = max(100 * math.exp(-q * T) - K * math.exp(-r * T), 0.0)
    hi = 100 * math.exp(-q * T)
    assert lo - 1e-9 <= v <= hi + 1e-9


@FAST
@given(beta=betas, H=hursts, vol=vols, K=strikes, dk=st.floats(0.5, 20.0))
def test_call_nonincreasing_in_strike(beta, H, vol, K, dk):
    p = _params(beta, H, vol, 0.03, 0.01)
    a = price_call_series(p, ContractSpec(K, 1.0)).price
    b = price_call_series(p, ContractSpec(K + dk, 1.0)).price
    assert b <= a + 1e-10


@FAST
@given(beta=betas, H=hursts, vol=vols, x0=st.floats(60.0, 140.0), dx=st.floats(0.5, 20.0))
def test_call_nondecreasing_in_spot(beta, H, vol, x0, dx):
    c = ContractSpec(100.0, 1.0)
    a = price_call_series(_params(beta, H, vol, 0.03, 0.0, x0), c).price
    b = price_call_series(_params(beta, H, vol, 0.03, 0.0, x0 + dx), c).price
    assert b >= a - 1e-10


@FAST
@given(beta=betas, H=hursts, vol=vols, r=rates, q=rates, K=strikes, T=maturities)
def test_put_call_parity(beta, H, vol, r, q, K, T):
    p = _params(beta, H, vol, r, q)
    call = price_call_series(p, ContractSpec(K, T)).price
    put = price_put(p, ContractSpec(K, T, kind="put")).price
    assert abs(call - put - (100 * math.exp(-q * T) - K * math.exp(-r * T))) <= 1e-9 * max(100.0, K)


@FAST
@given(H=st.floats(0.51, 0.95), t=st.floats(0.01, 10.0))
def test_memory_coefficient_without_discount(H, t):
    assert abs(c_of_t(H, 0.0, t) - H * t ** (2 * H - 1)) <= 1e-10 * max(1.0, H * t ** (2 * H - 1))


@FAST
@given(H=st.floats(0.51, 0.95), eta=st.floats(-0.5, 0.5), t=st.floats(0.01, 5.0))
def test_memory_coefficient_monotone_in_eta(H, eta, t):
    assert c_of_t(H, eta, t) > 0
    assert c_of_t(H, eta + 0.1, t) > c_of_t(H, eta, t)


@FAST
@given(beta=betas, H=hursts, t1=st.floats(0.05, 2.0), t2=st.floats(0.05, 2.0))
def test_clock_is_additive(beta, H, t1, t2):
    co = derive_coeffs(_params(beta, H, 0.2, 0.05, 0.02), ContractSpec(100.0, 5.0))
    whole = gamma_clock(co, H, 0.0, t1 + t2)
    parts = gamma_clock(co, H, 0.0, t1) + gamma_clock(co, H, t1, t1 + t2)
    assert abs(whole - parts) <= 1e-9 * whole


@FAST
@given(beta=st.floats(0.0, 1.9), H=hursts, mu=st.floats(-0.1, 0.1), t=st.floats(0.0, 3.0),
       y=st.floats(-2.0, 5.0))
def test_explicit_solution_inverts_transform(beta, H, mu, t, y):
    p = ModelParams(sigma=0.3, beta=beta, H=H, mu=mu, x0=50.0)
    cfg = KernelConfig(eta_mode="real_world_mu")
    g = float(explicit_g(p, t, y, cfg))
    rhs = (y + a_transform(p, 50.0)) / h_of_t((1 - beta / 2) * mu, t)
    if rhs > 1e-6:
        assert abs(a_transform(p, g) - rhs) <= 1e-9 * max(1.0, rhs)
    else:
        assert g <= 1e-6 ** (1.0 / (1 - beta / 2)) * (0.3 * (1 - beta / 2)) ** (1.0 / (1 - beta / 2)) + 1e-12


@FAST
@given(sigma=st.floats(0.02, 1.5), K=st.floats(60.0, 160.0), T=st.floats(0.1, 3.0),
       kind=st.sampled_from(["call", "put"]))
def test_implied_vol_round_trip(sigma, K, T, kind):
    fwd = 100 * math.exp(0.03 * T)
    otm = "call" if K >= fwd else "put"
    tv = bs_price(100, K, 0.05, 0.02, sigma, T, otm)
    assume(tv > 1e-8)
    price = bs_price(100, K, 0.05, 0.02, sigma, T, kind)
    assume(kind == otm or tv > 1e-6 * price)
    assert abs(implied_vol(price, 100, K, 0.05, 0.02, T, kind) - sigma) <= 1e-7


@FAST
@given(alpha=st.floats(0.05, 500.0), nu=st.floats(0.0, 800.0))
def test_incomplete_gamma_complement(alpha, nu):
    assert abs(upper_gamma_q(alpha, nu) + lower_gamma_p(alpha, nu) - 1.0) <= 1e-13
    assert 0.0 <= upper_gamma_q(alpha, nu) <= 1.0


@FAST
@given(m=st.floats(0.0, 200.0), lam=st.floats(0.01, 200.0))
def test_poisson_weight_against_direct_formula(m, lam):
    direct = m * math.log(lam) - lam - math.lgamma(m + 1.0)
    assert abs(log_poisson_weight(m, lam) - direct) <= 1e-12 * max(1.0, abs(m * math.log(lam)) + lam)


@FAST
@given(beta=betas, H=hursts, y=st.floats(1e-3, 1e5))
def test_density_nonnegative(beta, H, y):
    co = derive_coeffs(_params(beta, H, 0.2, 0.05, 0.02), ContractSpec(100.0, 1.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert transition_density(co, H, 0.0, 1.0, y) >= 0.0


@FAST
@given(spot=st.floats(50.0, 150.0), K=st.floats(50.0, 150.0), sigma=st.floats(0.0, 1.0), T=maturities)
def test_black_scholes_parity(spot, K, sigma, T):
    c = bs_price(spot, K, 0.04, 0.01, sigma, T, "call")
    p = bs_price(spot, K, 0.04, 0.01, sigma, T, "put")
    assert abs(c - p - (spot * math.exp(-0.01 * T) - K * math.exp(-0.04 * T))) <= 1e-10 * max(spot, K)
    assert np.isfinite(c) and c >= 0 and p >= 0
