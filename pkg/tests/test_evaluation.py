from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treerbsde.evaluation import (
    InvalidStoppingTime,
    RepresentationError,
    check_comparison,
    check_one_step_monotonicity,
    evaluate,
    implied_weights,
    solve_bsde,
)
from treerbsde.generators import (
    CashFlowProcess,
    RateSchedule,
    discount_generator,
    forward_wealth,
    funding_generator,
    zero_generator,
)
from treerbsde.lattice import (
    EventTree,
    StoppingTime,
    at_maturity,
    at_root,
    at_time,
    build_binomial,
)


def test_constant_terminal(tree_a, zero):
    flows = CashFlowProcess.zero(tree_a)
    assert evaluate(tree_a, zero, flows, at_maturity(tree_a), [5] * 7) == 5
    assert evaluate(tree_a, zero, flows, at_root(tree_a), {0: 11}) == 11


def test_discounting():
    t = build_binomial(100, F(6, 5), F(9, 10), 3, 1)
    r = F(1, 20)
    y0 = evaluate(t, discount_generator(r), CashFlowProcess.zero(t), at_maturity(t), [10] * t.n_nodes)
    assert y0 == 10 / (1 + r * F(1, 3)) ** 3


def test_one_step_call():
    t = build_binomial(100, F(6, 5), F(9, 10), 1, 1)
    sol = solve_bsde(t, zero_generator(), CashFlowProcess.zero(t), at_maturity(t), {1: 20, 2: 0})
    assert sol.Z[0] == F(2, 3)
    assert sol.Y0 == F(20, 3)
    assert implied_weights(t, 0) == [F(1, 3), F(2, 3)]


def test_scenario_a_mixed_stopping_time(tree_a, put_a, zero):
    X = [-h for h in put_a.payoff]
    tau = StoppingTime([1, 5, 6])
    assert evaluate(tree_a, zero, put_a.flows, tau, X) == F(76, 9)


def test_terminal_values_must_match_stop_set(tree_a, zero):
    flows = CashFlowProcess.zero(tree_a)
    with pytest.raises(ValueError):
        solve_bsde(tree_a, zero, flows, at_time(tree_a, 1), {1: 0})
    with pytest.raises(InvalidStoppingTime):
        solve_bsde(tree_a, zero, flows, StoppingTime([1]), {1: 0})


def test_one_step_relation_and_forward_consistency():
    t = build_binomial(100, F(11, 10), F(9, 10), 3, 1)
    gen = funding_generator(RateSchedule(F(1, 100), F(1, 20)))
    flows = CashFlowProcess.from_function(t, lambda v: F(v % 3, 4) - F(1, 4))
    zeta = [F((7 * v) % 11) - 5 for v in range(t.n_nodes)]
    sol = solve_bsde(t, gen, flows, at_maturity(t), zeta)
    V = forward_wealth(t, sol.Y0, sol.Z, flows, gen)
    assert V == sol.Y


def test_semigroup():
    t = build_binomial(100.0, 1.1, 0.9, 4, 1.0)
    gen = funding_generator(RateSchedule(0.02, 0.07))
    flows = CashFlowProcess.zero(t)
    zeta = [float(np.sin(v)) * 10 for v in range(t.n_nodes)]
    full = solve_bsde(t, gen, flows, at_maturity(t), zeta)
    first = solve_bsde(t, gen, flows, at_time(t, 2), {v: full.Y[v] for v in t.nodes_at(2)})
    assert first.Y0 == pytest.approx(full.Y0, abs=1e-12)


def test_linear_collapse():
    t = build_binomial(100, F(6, 5), F(9, 10), 3, 1)
    r = F(1, 25)
    zeta = [F(v * v % 13) for v in range(t.n_nodes)]
    y0 = evaluate(t, discount_generator(r), CashFlowProcess.zero(t), at_maturity(t), zeta)
    q = implied_weights(t, 0)[0]
    expect = 0
    for leaf in t.leaves:
        path = t.path(leaf)
        w = 1
        for a, b in zip(path, path[1:]):
            w *= q if t.children[a].index(b) == 0 else 1 - q
        expect += w * zeta[leaf]
    assert y0 == expect / (1 + r * F(1, 3)) ** 3


def test_comparison_checker(tree_a, zero):
    flows = CashFlowProcess.zero(tree_a)
    tau = at_maturity(tree_a)
    z = {v: F(v) for v in tau}
    same = check_comparison(tree_a, zero, flows, tau, z, z)
    assert same.ordered and not same.strictly_ordered and not same.violated
    bumped = dict(z)
    bumped[4] += 1
    assert check_comparison(tree_a, zero, flows, tau, bumped, z).strictly_ordered
    with pytest.raises(ValueError):
        check_comparison(tree_a, zero, flows, tau, z, bumped)


def test_monotonicity_detects_bad_bracket():
    good = build_binomial(100, F(6, 5), F(9, 10), 2, 1)
    assert check_one_step_monotonicity(good, zero_generator())
    bad = EventTree((None, 0, 0), ((1, 2), (), ()), ((F(1, 2), F(1, 2)), (), ()), (0, 1, 1),
                    ((F(100),), (F(110),), (F(105),)), (0, 1))
    res = check_one_step_monotonicity(bad, zero_generator())
    assert not res and res.node == 0
    t = build_binomial(100, F(6, 5), F(9, 10), 2, 1)
    assert check_one_step_monotonicity(t, funding_generator(RateSchedule(F(3, 100), F(3, 100))))


def test_representation_needs_d_plus_one_children():
    tri = EventTree((None, 0, 0, 0), ((1, 2, 3), (), (), ()), ((F(1, 3),) * 3, (), (), ()),
                    (0, 1, 1, 1), ((10,), (12,), (9,), (8,)), (0, 1))
    with pytest.raises(RepresentationError):
        evaluate(tri, zero_generator(), CashFlowProcess.zero(tri), at_maturity(tri), [0, 1, 2, 3])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_randomised_comparison(seed):
    rng = np.random.default_rng(seed)
    t = build_binomial(100.0, 1.1, 0.9, 3, 1.0)
    gen = funding_generator(RateSchedule(0.01, 0.05))
    flows = CashFlowProcess.from_function(t, lambda v: float(rng.normal()))
    tau = at_time(t, int(rng.integers(1, 4)))
    z2 = {v: float(rng.normal(0, 20)) for v in tau}
    z1 = {v: z2[v] + float(rng.exponential()) * (rng.random() < 0.5) for v in tau}
    res = check_comparison(t, gen, flows, tau, z1, z2)
    assert res.ordered and not res.violated
