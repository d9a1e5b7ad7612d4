"""
An American put on a two-step tree
==================================

Price the put, read off the hedge and the exercise times, then check the
price against brute force over every stopping time.
"""

from fractions import Fraction as F

from treerbsde import ContractSpec, build_binomial, price_contract, zero_generator
from treerbsde.oracle import sup_over_stopping_times

# exact arithmetic: every input is a Fraction or an int
tree = build_binomial(100, F(6, 5), F(9, 10), 2, 1)
print(tree.n_nodes, "nodes, leaves", list(tree.leaves))

# the issuer pays max(100 - S, 0), so its cash flow at exercise is negative
put = ContractSpec.from_functions(tree, lambda v: -max(100 - tree.spot(v), 0))
gen = zero_generator()

report = price_contract(tree, gen, put)
print("issuer price", report.p_issuer, "holder price", report.p_holder)
print("hedge at the root", report.issuer_hedge[0])
print("issuer stops at", report.tau_issuer_earliest.nodes())
print("holder may wait until", report.tau_holder_latest.nodes())

# the same number by enumerating all five stopping times
best = sup_over_stopping_times(tree, gen, put.flows, [-h for h in put.payoff])
print("brute force", best.value, "attained by", [t.nodes() for t in best.optimizers])
