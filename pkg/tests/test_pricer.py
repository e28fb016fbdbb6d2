import math
import warnings

import numpy as np
import pytest

from conftest import desk
from fraccev.black import bs_price
from fraccev.density import price_call_quadrature
from fraccev.kernel import DerivedCoeffs, gamma_clock
from fraccev.model import ContractSpec, ModelParams, ValidationError
from fraccev.pricer import (SeriesConfig, delta, price, price_black_scholes_branch, price_call_series, price_put,
                            price_put_series, series_terms)
from fraccev.specfun import ConvergenceError

COX = ModelParams(sigma=0.2, beta=1.0, H=0.5, r=0.05, delta=0.0, x0=100.0)
ATM = ContractSpec(100.0, 1.0)


def test_zero_strike_is_discounted_spot():
    for beta in (0.3, 1.0, 1.7):
        p = desk(beta=beta)
        res = price_call_series(p, ContractSpec(0.0, 1.0))
        assert res.price == pytest.approx(100.0 * math.exp(-0.02), rel=1e-13)
        assert price_put(p, ContractSpec(0.0, 1.0, kind="put")).price == pytest.approx(0.0, abs=1e-12)


def test_classical_cev_value():
    # Cox closed form in 40-digit arithmetic (noncentral chi-square form)
    res = price_call_series(COX, ATM)
    assert res.price == pytest.approx(4.880967729893285, rel=1e-11)
    assert res.error_estimate <= 1e-12 * res.price
    assert res.meta["terms_used"] > 0


def test_fractional_value_against_high_precision():
    # same series evaluated with 40-digit gamma functions and clock
    p = ModelParams(sigma=0.2, beta=1.0, H=0.75, r=0.05, delta=0.0, x0=100.0)
    assert price_call_series(p, ATM).price == pytest.approx(4.8809671701766565, rel=1e-10)


def test_desk_value():
    assert price_call_series(desk(H=0.5), ATM).price == pytest.approx(2.9535238188121156, rel=1e-11)


def test_classical_clock_closed_form():
    b = 0.05
    co = DerivedCoeffs(a=0.04, b=b, c=0.0, eta=0.025, x=100.0)
    assert gamma_clock(co, 0.5, 0.0, 1.0) == pytest.approx((1 - math.exp(-b)) / (2 * b), rel=1e-14)


@pytest.mark.parametrize("beta", [0.0, 0.5, 1.0, 1.5, 1.9])
@pytest.mark.parametrize("H", [0.5, 0.6, 0.9])
def test_bounds_and_monotone_in_strike(beta, H):
    p = desk(beta=beta, H=H)
    lo_bound = lambda K: max(100 * math.exp(-0.02) - K * math.exp(-0.05), 0.0)
    prev = math.inf
    for K in np.linspace(40.0, 200.0, 17):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            v = price_call_series(p, ContractSpec(float(K), 1.0)).price
        assert lo_bound(K) - 1e-10 <= v <= 100 * math.exp(-0.02) + 1e-10
        assert v <= prev + 1e-12
        prev = v


def test_monotone_in_spot():
    vals = [price_call_series(desk(x0=x), ATM).price for x in np.linspace(60.0, 140.0, 9)]
    assert np.all(np.diff(vals) >= 0)


def test_series_matches_quadrature():
    for beta in (0.5, 1.0, 1.5):
        for H in (0.5, 0.75):
            for K in (90.0, 100.0, 110.0):
                p, c = desk(beta=beta, H=H), ContractSpec(K, 1.0)
                s = price_call_series(p, c).price
                q = price_call_quadrature(p, c).price
                assert q == pytest.approx(s, rel=1e-4)


def test_put_call_parity():
    for beta in (0.5, 1.0, 1.5):
        p = desk(beta=beta)
        for K in (80.0, 100.0, 125.0):
            call = price_call_series(p, ContractSpec(K, 1.0)).price
            put = price_put(p, ContractSpec(K, 1.0, kind="put")).price
            assert call - put == pytest.approx(100 * math.exp(-0.02) - K * math.exp(-0.05), abs=1e-10)


def test_put_values():
    # classical ATM put against the finite-difference solver (8e-4 relative there)
    assert price_put(COX, ContractSpec(100.0, 1.0, kind="put")).price == pytest.approx(0.003910179964687677,
                                                                                       rel=1e-10)
    # out-of-the-money put at 40 digits
    v = price_put_series(desk(), ContractSpec(90.0, 1.0, kind="put")).price
    assert v == pytest.approx(5.8832197123840898e-12, rel=1e-9)
    # deep in the money
    deep = price_put(desk(), ContractSpec(1000.0, 1.0, kind="put")).price
    assert deep == pytest.approx(1000 * math.exp(-0.05) - 100 * math.exp(-0.02), rel=1e-12)


def test_put_as_printed_uses_parity():
    res = price_put(COX, ContractSpec(100.0, 1.0, kind="put"), SeriesConfig(formula_variant="as_printed"))
    assert res.meta["via"] == "parity"
    with pytest.raises(ValueError):
        price_put_series(COX, ContractSpec(100.0, 1.0, kind="put"), SeriesConfig(formula_variant="as_printed"))


def test_as_printed_variant_disagrees_with_classical_value():
    v = price_call_series(COX, ATM, SeriesConfig(formula_variant="as_printed")).price
    assert abs(v - 4.880967729893285) > 1.0


def test_delta():
    assert delta(desk(), ContractSpec(0.0, 1.0)) == pytest.approx(math.exp(-0.02), rel=1e-8)
    assert delta(desk(), ContractSpec(1e4, 1.0)) == pytest.approx(0.0, abs=1e-12)
    # finite-difference solver slope at X0 gives 0.99388229
    assert delta(COX, ATM) == pytest.approx(0.9938822906161389, abs=1e-3)
    d = delta(desk(beta=0.5), ContractSpec(110.0, 1.0))
    assert 0.0 <= d <= math.exp(-0.02)


def test_black_scholes_branch():
    p = ModelParams(sigma=0.2, beta=2.0, H=0.5, x0=100.0)
    assert price_black_scholes_branch(p, ATM).price == pytest.approx(7.965567455405796, rel=1e-12)
    p0 = ModelParams(sigma=1e-9, beta=2.0, H=0.7, r=0.05, delta=0.02, x0=100.0)
    fwd = 100 * math.exp(0.03)
    assert price_black_scholes_branch(p0, ATM).price == pytest.approx(math.exp(-0.05) * (fwd - 100), rel=1e-9)
    assert price_black_scholes_branch(desk(beta=2.0), ContractSpec(0.0, 1.0)).price == pytest.approx(
        100 * math.exp(-0.02), rel=1e-14)
    # H = 0.75, eta = 0: total variance is sigma^2 T^{2H}
    p = ModelParams(sigma=0.2, beta=2.0, H=0.75, x0=100.0)
    res = price_black_scholes_branch(p, ContractSpec(100.0, 2.0))
    vol = 0.2 * math.sqrt(2.0 ** 1.5 / 2.0)
    assert res.price == pytest.approx(bs_price(100, 100, 0, 0, vol, 2.0, "call"), rel=1e-10)
    with pytest.raises(ValueError):
        price_black_scholes_branch(desk(), ATM)


def test_dispatch():
    assert price(desk(beta=2.0), ATM).engine == "black_scholes"
    assert price(desk(), ContractSpec(100.0, 1.0, kind="put")).price == price_put(
        desk(), ContractSpec(100.0, 1.0, kind="put")).price


def test_near_two_warns():
    with pytest.warns(RuntimeWarning, match="beta close to 2"):
        price_call_series(desk(beta=1.96), ATM)


def test_invalid_inputs():
    with pytest.raises(ValidationError):
        price_call_series(desk(beta=2.0), ATM)
    with pytest.raises(ValidationError):
        price_call_series(desk(), ContractSpec(-1.0, 1.0))
    with pytest.raises(ConvergenceError):
        price_call_series(desk(), ATM, SeriesConfig(max_terms=2))
    with pytest.raises(ValueError):
        SeriesConfig(tail_tol=0.0)


def test_weight_normalization():
    # with y = 0 every factor is one and the retained weights carry all but the tail
    for lam in (0.3, 40.0, 2500.0, 44577.0):
        t = series_terms(lam, 1.0, 0.0, SeriesConfig())
        assert math.fsum(t["w1"]) >= 1 - 1e-12
        assert math.fsum(t["w1"]) <= 1 + 1e-13
        assert t["tail1"] < 1e-12


def test_truncation_uses_factor_bound():
    # deep out of the money: left Poisson tail is dropped where G is negligible
    t = series_terms(2500.0, 1.0, 2400.0, SeriesConfig())
    assert t["tail1"] < 1e-12
    assert t["n1"][0] > 0


def test_huge_poisson_mean_fails_fast():
    # beta = 0 with a local vol of 0.06%: lam is about 2.6e6 and the series
    # would need more than max_terms terms
    p = ModelParams(sigma=0.0625, beta=0.0, H=0.5, r=0.0, delta=0.0, x0=100.0)
    with pytest.raises(ConvergenceError):
        price_call_series(p, ContractSpec(50.0, 0.125))


def test_vanishing_rate_difference():
    # a denormal dividend yield must not collapse the classical clock
    p = ModelParams(sigma=0.5, beta=0.0, H=0.5, r=0.0, delta=5e-324, x0=100.0)
    q = ModelParams(sigma=0.5, beta=0.0, H=0.5, r=0.0, delta=0.0, x0=100.0)
    c = ContractSpec(100.0, 0.25)
    assert price_call_series(p, c).price == pytest.approx(price_call_series(q, c).price, rel=1e-14)
