"""How long memory moves an at-the-money call.

The memory clock grows roughly like T^2H / 2, so at one year every H gives
about the same price, while longer maturities gain value from memory and
shorter ones lose it. H = 0.5 is the classical CEV model.
"""
from fraccev import ContractSpec, ModelParams, price_call_series

print(f"{'T':>5} {'H':>5} {'clock':>10} {'call':>10} {'terms':>6}")
for T in (0.25, 1.0, 4.0):
    contract = ContractSpec(strike=100.0, maturity=T)
    for H in (0.5, 0.75, 0.9):
        params = ModelParams(sigma=0.2, beta=1.0, H=H, r=0.05, delta=0.02, x0=100.0)
        res = price_call_series(params, contract)
        print(f"{T:5.2f} {H:5.2f} {res.meta['gamma_T']:10.6f} {res.price:10.6f} {res.meta['terms_used']:6d}")
