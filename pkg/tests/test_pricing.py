from fractions import Fraction as F

import pytest

from treerbsde.conditions import ConditionKind
from treerbsde.generators import (
    CashFlowProcess,
    RateSchedule,
    forward_wealth,
    funding_generator,
    zero_generator,
)
from treerbsde.lattice import StoppingTime, at_maturity, build_binomial
from treerbsde.pricing import (
    ContractSpec,
    TheoremViolation,
    classify_break_even,
    holder_acceptable_price,
    holder_relative_reward,
    issuer_acceptable_price,
    issuer_relative_reward,
    price_contract,
    rational_exercise_times,
)

SCENARIO_B = funding_generator(RateSchedule(F(1, 100), F(5, 100)))


def test_relative_rewards(tree_a, put_a):
    zero_bench = [0] * 7
    assert issuer_relative_reward(put_a, zero_bench) == [max(100 - tree_a.spot(v), 0) for v in range(7)]
    x = holder_relative_reward(put_a, zero_bench)
    assert [x[v] for v in tree_a.leaves] == [0, 0, 0, -19]
    nothing = ContractSpec.from_functions(tree_a, lambda v: 0)
    bench = [100 + v for v in range(7)]
    assert issuer_relative_reward(nothing, bench) == bench
    five = ContractSpec.from_functions(tree_a, lambda v: 5)
    assert issuer_relative_reward(five, bench) == [b - 5 for b in bench]


def test_scenario_a_prices(tree_a, put_a, zero):
    iss = issuer_acceptable_price(tree_a, zero, put_a, 0)
    hol = holder_acceptable_price(tree_a, zero, put_a, 0)
    assert iss.price == hol.price == F(76, 9)
    assert iss.comparison_verified
    shifted = issuer_acceptable_price(tree_a, zero, put_a, 3, RateSchedule(0, 0))
    assert shifted.price == F(76, 9) and shifted.solution.Y0 == F(76, 9) + 3


def test_zero_contract(tree_a, zero):
    nothing = ContractSpec.from_functions(tree_a, lambda v: 0)
    assert issuer_acceptable_price(tree_a, zero, nothing, 0).price == 0
    assert holder_acceptable_price(tree_a, zero, nothing, 0).price == 0


def test_scenario_b_wedge(tree_a, put_a):
    rep = price_contract(tree_a, SCENARIO_B, put_a)
    assert rep.p_issuer == F(321100, 40401)
    assert rep.p_holder <= rep.p_issuer
    assert rep.diagnostics["wedge"] == rep.p_issuer - rep.p_holder
    assert rep.issuer_fair(rep.p_issuer) and not rep.issuer_fair(rep.p_issuer + F(1, 10**6))
    assert rep.holder_fair(rep.p_holder) and not rep.holder_fair(rep.p_holder - F(1, 10**6))
    lo, hi = rep.diagnostics["fair_interval"]["low"], rep.diagnostics["fair_interval"]["high"]
    assert (lo, hi) == (rep.p_holder, rep.p_issuer)


def test_replication(tree_a, put_a, zero):
    rep = price_contract(tree_a, SCENARIO_B, put_a)
    sol = rep.issuer_solution
    V = forward_wealth(tree_a, rep.p_issuer, sol.Z, put_a.flows, SCENARIO_B)
    assert all(V[v] >= sol.obstacle[v] for v in range(7))
    assert all(V[v] == sol.obstacle[v] for v in rep.tau_issuer_earliest)


def test_classify_break_even_scenario_a(tree_a, put_a, zero):
    assert classify_break_even(tree_a, zero, put_a, 0, StoppingTime([1, 5, 6])).value
    assert classify_break_even(tree_a, zero, put_a, 0, at_maturity(tree_a)).value
    rep = classify_break_even(tree_a, zero, put_a, 0, StoppingTime([1, 2]))
    assert rep.agree and not rep.value


def test_classify_break_even_detects_broken_solver(tree_a, put_a, zero, monkeypatch):
    import treerbsde.pricing as pricing

    real = pricing.solve_reflected_lower

    def broken(tree, gen, flows, obstacle, tol=1e-12):
        sol = real(tree, gen, flows, obstacle, tol)
        Y = list(sol.Y)
        Y[0] += 1
        return type(sol)(Y, sol.Z, sol.K_increments, sol.side, sol.obstacle, sol.candidate, sol.tree)

    monkeypatch.setattr(pricing, "solve_reflected_lower", broken)
    with pytest.raises(TheoremViolation):
        classify_break_even(tree_a, zero, put_a, 0, StoppingTime([1, 5, 6]))


def test_rational_exercise_scenario_a(tree_a, put_a, zero):
    rat = rational_exercise_times(tree_a, zero, put_a, 0)
    assert sorted(t.nodes() for t in rat.times) == [[1, 5, 6], [3, 4, 5, 6]]
    assert rat.earliest.nodes() == [1, 5, 6]
    assert rat.latest.time.nodes() == [3, 4, 5, 6] and not rat.latest.caveat


def test_rational_exercise_constant_and_budget():
    t = build_binomial(100, F(6, 5), F(9, 10), 3, 1)
    const = ContractSpec.from_functions(t, lambda v: -4)
    rat = rational_exercise_times(t, zero_generator(), const, 0)
    assert len(rat.times) == 26
    refused = rational_exercise_times(t, zero_generator(), const, 0, budget=10)
    assert refused.times is None and "26" in refused.refused
    assert refused.predicate(at_maturity(t))


def test_immediate_reflection_leaves_only_root():
    t = build_binomial(100, F(6, 5), F(9, 10), 2, 1)
    c = ContractSpec.from_functions(t, lambda v: -(10 - t.level[v]))
    rat = rational_exercise_times(t, zero_generator(), c, 0)
    assert [tau.nodes() for tau in rat.times] == [[0]]


def test_nonmonotone_tree_flags_comparison(caplog):
    from treerbsde.lattice import EventTree

    t = EventTree((None, 0, 0), ((1, 2), (), ()), ((0.5, 0.5), (), ()), (0, 1, 1),
                  ((100.0,), (110.0,), (105.0,)), (0.0, 1.0))
    c = ContractSpec.from_functions(t, lambda v: -max(108 - t.spot(v), 0))
    iss = issuer_acceptable_price(t, zero_generator(), c, 0)
    assert not iss.comparison_verified
    assert "comparison_unverified" in caplog.text


def test_contract_shape_checked(tree_a):
    with pytest.raises(ValueError):
        ContractSpec((0,) * 3, CashFlowProcess.zero(tree_a))


def test_condition_kinds():
    assert ConditionKind("AO'").holder and ConditionKind("BG", 1).base == "BG"
    with pytest.raises(ValueError):
        ConditionKind("BG")
    with pytest.raises(ValueError):
        ConditionKind("XX")
