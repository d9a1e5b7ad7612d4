"""
Borrowing costs open a gap between the two prices
=================================================

With a single interest rate the issuer and the holder agree on the price.
Once borrowing is dearer than lending they no longer do.
"""

import numpy as np

from treerbsde import (
    ContractSpec,
    RateSchedule,
    build_binomial,
    funding_generator,
    price_contract,
)

tree = build_binomial(100.0, 1.1, 0.92, 5, 1.0)
put = ContractSpec.from_functions(tree, lambda v: -max(100.0 - tree.spot(v), 0.0))

for r_b in np.linspace(0.02, 0.12, 6):
    rates = RateSchedule(0.02, float(r_b))
    rep = price_contract(tree, funding_generator(rates), put, benchmark=rates)
    print(f"r_b={r_b:.2f}  issuer {float(rep.p_issuer):8.4f}  holder {float(rep.p_holder):8.4f}"
          f"  wedge {float(rep.diagnostics['wedge']):.4f}")
