from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treerbsde.conditions import ConditionKind
from treerbsde.generators import (
    CashFlowProcess,
    Endowments,
    RateSchedule,
    discount_generator,
    funding_generator,
)
from treerbsde.lattice import EnumerationBudgetExceeded, EventTree, StoppingTime, build_binomial
from treerbsde.oracle import (
    ComparisonUnavailable,
    OracleError,
    check_condition,
    check_forward_monotonicity_sampled,
    check_superhedge_break_even_logic,
    comparison_sweep,
    holder_min_cost_literal,
    holder_min_cost_over_tau,
    inf_over_stopping_times,
    min_superhedge_cost,
    stopping_values_literal,
    sup_over_stopping_times,
    verify_interval_structure,
)
from treerbsde.pricing import ContractSpec, issuer_acceptable_price
from treerbsde.reflected import solve_reflected_lower, solve_reflected_upper

ZERO_ENDOWMENT = Endowments(0, 0)


def test_sup_scenario_a(tree_a, put_a, zero):
    X = [-h for h in put_a.payoff]
    res = sup_over_stopping_times(tree_a, zero, put_a.flows, X)
    assert res.value == F(76, 9) and res.count == 5
    assert sorted(t.nodes() for t in res.optimizers) == [[1, 5, 6], [3, 4, 5, 6]]


def test_sup_constant_and_submartingale(tree_a, zero):
    flows = CashFlowProcess.zero(tree_a)
    res = sup_over_stopping_times(tree_a, zero, flows, [3] * 7)
    assert res.value == 3 and len(res.optimizers) == 5
    sub = [tree_a.spot(v) + tree_a.level[v] for v in range(7)]
    res = sup_over_stopping_times(tree_a, zero, flows, sub)
    assert [t.nodes() for t in res.optimizers] == [list(tree_a.leaves)]


def test_inf_duality(tree_a, put_a, zero):
    X = [-h for h in put_a.payoff]
    low = inf_over_stopping_times(tree_a, zero, put_a.flows, [-x for x in X])
    assert low.value == F(-76, 9)
    assert inf_over_stopping_times(tree_a, zero, put_a.flows, [2] * 7).value == 2


def test_value_only_run_keeps_no_optimizers(tree_a, zero):
    res = sup_over_stopping_times(tree_a, zero, CashFlowProcess.zero(tree_a), [1] * 7,
                                  keep_optimizers=False)
    with pytest.raises(OracleError):
        res.optimizers


def test_budget_refusal(zero):
    t = build_binomial(100.0, 1.1, 0.9, 4, 1.0)
    with pytest.raises(EnumerationBudgetExceeded):
        sup_over_stopping_times(t, zero, CashFlowProcess.zero(t), [0.0] * t.n_nodes, budget=100)


def test_min_superhedge_examples(tree_a, put_a, zero):
    X = [-h for h in put_a.payoff]
    assert min_superhedge_cost(tree_a, zero, put_a.flows, X) == pytest.approx(76 / 9, abs=1e-9)
    assert min_superhedge_cost(tree_a, zero, put_a.flows, [0] * 7) == pytest.approx(0, abs=1e-9)
    const = min_superhedge_cost(tree_a, discount_generator(F(1, 20)), put_a.flows, [5] * 7)
    assert const == pytest.approx(5, abs=1e-9)


def test_holder_min_cost_examples(tree_a, put_a, zero):
    x = [h for h in put_a.payoff]
    assert holder_min_cost_over_tau(tree_a, zero, -put_a.flows, x) == pytest.approx(-76 / 9, abs=1e-9)
    assert holder_min_cost_over_tau(tree_a, zero, -put_a.flows, [4] * 7) == pytest.approx(4, abs=1e-9)
    gen = funding_generator(RateSchedule(F(1, 100), F(5, 100)))
    y0 = solve_reflected_upper(tree_a, gen, -put_a.flows, x).Y0
    assert holder_min_cost_over_tau(tree_a, gen, -put_a.flows, x) == pytest.approx(float(y0), abs=1e-9)


def test_superhedge_preconditions(zero):
    bad = EventTree((None, 0, 0), ((1, 2), (), ()), ((0.5, 0.5), (), ()), (0, 1, 1),
                    ((100.0,), (110.0,), (105.0,)), (0.0, 1.0))
    with pytest.raises(OracleError):
        min_superhedge_cost(bad, zero, CashFlowProcess.zero(bad), [0.0, 1.0, 2.0])
    tri = EventTree((None, 0, 0, 0), ((1, 2, 3), (), (), ()), ((F(1, 3),) * 3, (), (), ()),
                    (0, 1, 1, 1), ((10,), (12,), (9,), (8,)), (0, 1))
    with pytest.raises(OracleError):
        min_superhedge_cost(tri, zero, CashFlowProcess.zero(tri), [0, 1, 2, 3])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_product_and_literal_paths_agree(seed):
    rng = np.random.default_rng(seed)
    t = build_binomial(100.0, 1.1, 0.9, 3, 1.0)
    gen = funding_generator(RateSchedule(0.01, float(rng.uniform(0.01, 0.1))))
    flows = CashFlowProcess.from_function(t, lambda v: float(rng.normal(0, 0.5)))
    obstacle = [float(x) for x in rng.normal(0, 10, t.n_nodes)]
    literal = stopping_values_literal(t, gen, flows, obstacle)
    best = max(v for _, v in literal)
    res = sup_over_stopping_times(t, gen, flows, obstacle)
    assert res.value == pytest.approx(best, abs=1e-12)
    winners = {tau.stop_set for tau, v in literal if abs(v - best) <= 1e-9}
    assert {tau.stop_set for tau in res.optimizers} == winners
    assert res.value == pytest.approx(solve_reflected_lower(t, gen, flows, obstacle).Y0, abs=1e-9)
    assert min_superhedge_cost(t, gen, flows, obstacle) == pytest.approx(res.value, abs=1e-9)
    assert holder_min_cost_over_tau(t, gen, flows, obstacle) == pytest.approx(
        holder_min_cost_literal(t, gen, flows, obstacle), abs=1e-9)


def test_conditions_scenario_a(tree_a, put_a, zero):
    pi = issuer_acceptable_price(tree_a, zero, put_a, 0)
    Z = pi.solution.Z
    tau = StoppingTime([1, 5, 6])

    def cond(name, p, t=tau):
        return check_condition(ConditionKind(name), tree_a, zero, put_a, ZERO_ENDOWMENT, p, Z, t)

    assert cond("BE", pi.price) and cond("NA", pi.price) and not cond("AO", pi.price)
    assert cond("AO", pi.price + 1, None)
    assert not cond("SH", pi.price - 1, None)
    assert check_condition(ConditionKind("BG", F(1, 2)), tree_a, zero, put_a, ZERO_ENDOWMENT,
                           pi.price, Z, tau)


def test_interval_structure_examples(tree_a, put_a, zero):
    p = F(76, 9)
    rep = verify_interval_structure(tree_a, zero, put_a, ZERO_ENDOWMENT, [p - 1, p, p + 1])
    assert [r.classification for r in rep.probes] == ["fair", "fair", "arbitrage"]
    nothing = ContractSpec.from_functions(tree_a, lambda v: 0)
    rep = verify_interval_structure(tree_a, zero, nothing, ZERO_ENDOWMENT, [-1, 0, 1])
    assert [r.classification for r in rep.probes] == ["fair", "fair", "arbitrage"]
    gen = funding_generator(RateSchedule(F(1, 100), F(5, 100)))
    for side in ("issuer", "holder"):
        rep = verify_interval_structure(tree_a, gen, put_a, ZERO_ENDOWMENT, side=side)
        assert rep.ok and len(rep.probes) == 11


def test_sampled_checks(tree_a, put_a, zero):
    gen = funding_generator(RateSchedule(F(1, 100), F(5, 100)))
    logic = check_superhedge_break_even_logic(tree_a, gen, put_a, ZERO_ENDOWMENT, n_samples=200)
    assert logic.ok and logic.samples == 200
    assert check_forward_monotonicity_sampled(tree_a, gen, put_a.flows, 50).ok
    assert comparison_sweep(tree_a, gen, put_a.flows, 200).ok


def test_comparison_refused_on_bad_tree(zero):
    bad = EventTree((None, 0, 0), ((1, 2), (), ()), ((0.5, 0.5), (), ()), (0, 1, 1),
                    ((100.0,), (110.0,), (105.0,)), (0.0, 1.0))
    with pytest.raises(ComparisonUnavailable):
        comparison_sweep(bad, zero, CashFlowProcess.zero(bad))
    assert not comparison_sweep(bad, zero, CashFlowProcess.zero(bad), 100, force=True).ok
