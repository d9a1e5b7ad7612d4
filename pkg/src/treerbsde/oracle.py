"""Brute-force verifiers that share no code with the reflected solvers.

Optimal stopping values are computed over the full family of stopping times,
superhedging costs by bisection on the explicit wealth step, and the pricing
conditions by running wealth forward. Everything here is meant for small
trees; enumeration refuses loudly once the family exceeds the budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import conditions
from .conditions import ConditionKind
from .evaluation import (
    backward,
    check_one_step_monotonicity,
    evaluate,
    one_step,
)
from .generators import (
    CashFlowProcess,
    Endowments,
    Generator,
    check_stability,
    forward_wealth,
    verify_forward_monotonicity,
)
from .lattice import (
    EnumerationBudgetExceeded,
    EventTree,
    StoppingTime,
    count_stopping_times,
    default_budget,
    enumerate_stopping_times,
)
from .numeric import all_exact, to_float
from .pricing import (
    ContractSpec,
    TheoremViolation,
    holder_acceptable_price,
    issuer_acceptable_price,
    resolve_benchmark,
)

BISECT_EPS = 1e-10


class OracleError(ValueError):
    """Oracle precondition not met (e.g. non-binomial node for the superhedging recursion)."""


class BracketError(OracleError):
    def __init__(self, node: int):
        self.node = node
        super().__init__(f"bisection bracket could not be established at node {node}")


class ComparisonUnavailable(RuntimeError):
    """The tree fails one-step monotonicity, so comparison checks are refused."""


# -- optimal stopping by enumeration --------------------------------------------

def _leaf_array(x, exact: bool) -> np.ndarray:
    return np.array([x], dtype=object if exact else float)


def _family_values(tree: EventTree, obstacle: Sequence, step: Callable, from_k: int,
                   dedup: bool, exact: bool) -> list:
    """Per node, the values of every stopping time of the subtree rooted there.

    Index 0 is "stop here" (when allowed); the rest follow the C-order product
    of the children's families, the same order :func:`enumerate_stopping_times` uses.
    """
    vals: list = [None] * tree.n_nodes
    for v in reversed(range(tree.n_nodes)):
        kids = tree.children[v]
        if not kids:
            vals[v] = _leaf_array(obstacle[v], exact)
            continue
        grids = np.meshgrid(*(vals[c] for c in kids), indexing="ij")
        cont = np.asarray(step(v, [g.ravel() for g in grids]))
        if cont.ndim == 0:
            cont = cont.reshape(1)
        if dedup:
            cont = np.unique(cont)
        if tree.level[v] >= from_k:
            cont = np.concatenate([_leaf_array(obstacle[v], exact), cont])
        vals[v] = cont
    return vals


@dataclass
class StoppingValue:
    """Optimum of an optimal stopping problem with the optimisers kept lazily."""

    value: object
    count: int
    _tree: EventTree = field(repr=False)
    _vals: list | None = field(repr=False)
    _indices: np.ndarray | None = field(repr=False)
    _from_k: int = field(repr=False, default=0)

    def _decode(self, v: int, idx: int, out: list) -> None:
        tree = self._tree
        if tree.level[v] >= self._from_k:
            if idx == 0:
                out.append(v)
                return
            idx -= 1
        kids = tree.children[v]
        sub = np.unravel_index(idx, tuple(len(self._vals[c]) for c in kids))
        for c, i in zip(kids, sub):
            self._decode(c, int(i), out)

    @cached_property
    def optimizers(self) -> list:
        if self._indices is None:
            raise OracleError("optimisers were not kept (value-only run)")
        out = []
        for i in self._indices:
            nodes: list = []
            self._decode(0, int(i), nodes)
            out.append(StoppingTime(nodes))
        return out


def _optimise(tree, gen, flows, obstacle, sense, tol, from_time_index, budget, keep):
    check_stability(tree, gen)
    budget = default_budget() if budget is None else budget
    total = count_stopping_times(tree, from_time_index)
    if total > budget:
        raise EnumerationBudgetExceeded(total, budget)
    exact = tree.exact and tol == 0

    def step(v, kids):
        return one_step(tree, gen, v, kids, flows[v])[0]

    vals = _family_values(tree, obstacle, step, from_time_index, dedup=not keep, exact=exact)
    root = vals[0]
    best = root.max() if sense > 0 else root.min()
    idx = np.flatnonzero(np.abs(root - best) <= tol) if keep else None
    return StoppingValue(best, total, tree, vals if keep else None, idx, from_time_index)


def sup_over_stopping_times(tree: EventTree, gen: Generator, flows: CashFlowProcess,
                            obstacle: Sequence, tol=None, from_time_index: int = 0,
                            budget: int | None = None, keep_optimizers: bool = True
                            ) -> StoppingValue:
    """``max`` over every stopping time of ``evaluate(tau, obstacle_tau)``.

    With ``tol=None`` ties are detected exactly for exact trees and within
    ``1e-9`` otherwise.
    """
    if tol is None:
        tol = 0 if tree.exact else 1e-9
    return _optimise(tree, gen, flows, obstacle, +1, tol, from_time_index, budget,
                     keep_optimizers)


def inf_over_stopping_times(tree: EventTree, gen: Generator, flows: CashFlowProcess,
                            obstacle: Sequence, tol=None, from_time_index: int = 0,
                            budget: int | None = None, keep_optimizers: bool = True
                            ) -> StoppingValue:
    if tol is None:
        tol = 0 if tree.exact else 1e-9
    return _optimise(tree, gen, flows, obstacle, -1, tol, from_time_index, budget,
                     keep_optimizers)


def stopping_values_literal(tree: EventTree, gen: Generator, flows: CashFlowProcess,
                            obstacle: Sequence, budget: int | None = None) -> list:
    """``(tau, value)`` for every stopping time, one full backward solve each."""
    return [(tau, evaluate(tree, gen, flows, tau, obstacle))
            for tau in enumerate_stopping_times(tree, budget=budget)]


# -- superhedging by bisection ----------------------------------------------------

def _superhedge_step(tree: EventTree, gen: Generator, n: int, required: Sequence,
                     dA, eps: float = BISECT_EPS, exact: bool = False):
    """Smallest wealth at ``n`` from which one explicit step reaches ``required``.

    For a binomial node whose driver moves slower in z than the price spread,
    ``min(up surplus, down surplus)`` is maximised where both surpluses are equal,
    i.e. at the replicating slope, so feasibility of ``v`` reduces to one
    inequality that is monotone in ``v``.
    """
    kids = tree.children[n]
    if tree.dim != 1 or len(kids) != 2:
        raise OracleError(f"node {n}: superhedging recursion needs a binomial single-asset node")
    s = to_float(tree.spot(n))
    su, sd = (to_float(tree.spot(c)) for c in kids)
    dsu, dsd = su - s, sd - s
    if not dsu > 0 > dsd:
        raise OracleError(f"node {n}: spot lies outside its children's prices")
    dt = to_float(tree.dt(n))
    if dt * to_float(gen.lipschitz_z) * abs(s) >= min(dsu, -dsd):
        raise OracleError(f"node {n}: driver too steep in z for the price spread")
    ru, rd = (np.asarray(r, dtype=float) for r in required)
    da = to_float(dA)
    z = (ru - rd) / (su - sd)
    target = ru - z * dsu - da
    t = to_float(tree.time(n))

    def h(v):
        return v - dt * gen(t, v, z, s)

    span = np.maximum(np.abs(ru - rd), 1.0)
    lo = np.minimum(ru, rd) - 10 * span
    hi = np.maximum(ru, rd) + 10 * span
    for _ in range(200):
        bad_lo, bad_hi = h(lo) > target, h(hi) < target
        if not (bad_lo.any() or bad_hi.any()):
            break
        width = hi - lo
        lo = np.where(bad_lo, lo - width, lo)
        hi = np.where(bad_hi, hi + width, hi)
    else:
        raise BracketError(n)
    while np.max(hi - lo) > eps:
        mid = 0.5 * (lo + hi)
        ok = h(mid) >= target
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    approx = 0.5 * (lo + hi)
    if not exact:
        return approx
    return _exact_refine(tree, gen, n, required, dA, approx)


def _exact_refine(tree: EventTree, gen: Generator, n: int, required: Sequence, dA, approx):
    """Snap bisection results onto the exact root of a piecewise-linear step.

    Secants through points just around the float root reproduce the root exactly
    whenever the step is linear on that side, which covers every kink-wise linear
    driver. A candidate is only accepted after an exact check.
    """
    kids = tree.children[n]
    s = tree.spot(n)
    su, sd = (tree.spot(c) for c in kids)
    dt, t = tree.dt(n), tree.time(n)
    ru, rd = (np.atleast_1d(np.asarray(r, dtype=object)) for r in required)
    out = np.empty(np.size(approx), dtype=object)
    for i, (a_u, a_d, y) in enumerate(zip(ru, rd, np.atleast_1d(approx))):
        z = (a_u - a_d) / (su - sd)
        target = a_u - z * (su - s) - dA

        def h(v):
            return v - dt * gen(t, v, z, s)

        y = Fraction(float(y))
        d = Fraction(1e-7) * (1 + abs(y))
        pts = [y - 2 * d, y - d, y + d, y + 2 * d]
        found = None
        for a, b in ((pts[1], pts[2]), (pts[0], pts[1]), (pts[2], pts[3])):
            ha, hb = h(a), h(b)
            if ha == hb:
                continue
            c = a + (target - ha) * (b - a) / (hb - ha)
            if h(c) == target:
                found = c
                break
        if found is None:
            raise OracleError(f"node {n}: no exact root near {float(y)!r}; use float mode")
        out[i] = found
    return out if np.ndim(approx) else out[0]


def _exact_inputs(tree: EventTree, gen: Generator, flows: CashFlowProcess, values) -> bool:
    if not (tree.exact and all_exact(*values) and all_exact(*flows.increments)):
        return False
    probe = gen(tree.time(0), Fraction(1), Fraction(1), tree.spot(0))
    return all_exact(probe)


def min_superhedge_cost(tree: EventTree, gen: Generator, flows: CashFlowProcess,
                        floor: Sequence, eps: float = BISECT_EPS):
    """Least initial wealth keeping wealth at or above ``floor`` at every node.

    Exact inputs give an exact answer (see :func:`_exact_refine`); otherwise
    the result carries the bisection error ``eps`` per step.
    """
    check_stability(tree, gen)
    exact = _exact_inputs(tree, gen, flows, floor)
    conv = (lambda x: x) if exact else to_float
    req = [None] * tree.n_nodes
    for v in reversed(range(tree.n_nodes)):
        f = conv(floor[v])
        kids = tree.children[v]
        if not kids:
            req[v] = f
            continue
        cont = _superhedge_step(tree, gen, v, [req[c] for c in kids], flows[v], eps, exact)
        req[v] = max(f, cont if exact else float(cont))
    return req[0]


def holder_min_cost_over_tau(tree: EventTree, gen: Generator, flows: CashFlowProcess,
                             target: Sequence, budget: int | None = None,
                             eps: float = BISECT_EPS):
    """``min`` over stopping times of the cost to reach ``target`` at the stopping time.

    The target only binds on the stop set, so each stopping time gets its own
    truncated recursion; the per-subtree families of costs are combined so the
    work is shared between stopping times with common pieces.
    """
    check_stability(tree, gen)
    budget = default_budget() if budget is None else budget
    total = count_stopping_times(tree)
    if total > budget:
        raise EnumerationBudgetExceeded(total, budget)
    exact = _exact_inputs(tree, gen, flows, target)

    def step(v, kids):
        return _superhedge_step(tree, gen, v, kids, flows[v], eps, exact)

    values = list(target) if exact else [to_float(x) for x in target]
    vals = _family_values(tree, values, step, 0, dedup=True, exact=exact)
    best = vals[0].min()
    return best if exact else float(best)


def holder_min_cost_literal(tree: EventTree, gen: Generator, flows: CashFlowProcess,
                            target: Sequence, budget: int | None = None,
                            eps: float = BISECT_EPS) -> float:
    """Same as :func:`holder_min_cost_over_tau`, one stopping time at a time."""
    best = math.inf
    for tau in enumerate_stopping_times(tree, budget=budget):
        req: dict = {v: to_float(target[v]) for v in tau}
        for v in reversed(range(tree.n_nodes)):
            if v in req or tree.is_leaf(v):
                continue
            kids = tree.children[v]
            if all(c in req for c in kids):
                req[v] = float(_superhedge_step(tree, gen, v, [req[c] for c in kids],
                                                flows[v], eps))
        best = min(best, req[0])
    return best


# -- conditions --------------------------------------------------------------------

def trader_gap(kind: ConditionKind, tree: EventTree, gen: Generator, contract: ContractSpec,
               endowment: Endowments, p, strategy: Sequence, benchmark=None) -> list:
    """Wealth plus (issuer) or minus (holder) payoff, net of the benchmark."""
    if kind.holder:
        x = endowment.x2
        V = forward_wealth(tree, x - p, strategy, -contract.flows, gen)
        return conditions.holder_gap(V, contract.payoff, resolve_benchmark(tree, x, benchmark))
    x = endowment.x1
    V = forward_wealth(tree, x + p, strategy, contract.flows, gen)
    return conditions.issuer_gap(V, contract.payoff, resolve_benchmark(tree, x, benchmark))


def check_condition(kind: ConditionKind, tree: EventTree, gen: Generator,
                    contract: ContractSpec, endowment: Endowments, p, strategy: Sequence,
                    tau: StoppingTime | None = None, benchmark=None, tol=None) -> bool:
    """Run wealth forward from the traded price and test ``kind`` literally.

    With ``tau=None`` the condition is read for the pair (price, strategy):
    issuer (SH) and (AO) must hold at every stopping time, the others at some.
    """
    if tol is None:
        tol = 0 if tree.exact else 1e-9
    gap = trader_gap(kind, tree, gen, contract, endowment, p, strategy, benchmark)
    return conditions.evaluate_condition(kind, tree, gap, tau, tol)


def random_strategy(tree: EventTree, rng: np.random.Generator, bound: float = 3.0) -> list:
    z = [None] * tree.n_nodes
    for v in tree.internal:
        if tree.dim == 1:
            z[v] = float(rng.uniform(-bound, bound))
        else:
            z[v] = tuple(float(x) for x in rng.uniform(-bound, bound, tree.dim))
    return z


# -- interval structure ---------------------------------------------------------------

FAIR, ARBITRAGE, INCONSISTENT = "fair", "arbitrage", "inconsistent"


@dataclass(frozen=True)
class ProbeResult:
    side: str
    price: object
    classification: str
    expected: str

    @property
    def ok(self) -> bool:
        return self.classification == self.expected


@dataclass(frozen=True)
class IntervalReport:
    side: str
    boundary: object
    probes: tuple

    @property
    def ok(self) -> bool:
        return all(p.ok for p in self.probes)


def default_probes(boundary, n: int = 11, spacing=1) -> list:
    half = n // 2
    return [boundary + spacing * (j - half) for j in range(n)]


def verify_interval_structure(tree: EventTree, gen: Generator, contract: ContractSpec,
                              endowment: Endowments, probe_prices: Sequence | None = None,
                              side: str = "issuer", benchmark=None, n_samples: int = 16,
                              seed: int = 0, tol: float = 1e-8,
                              raise_on_violation: bool = True) -> IntervalReport:
    """Classify probe prices as fair or arbitrage without using the reflected solver's price.

    Fairness uses the bisection superhedging cost. Arbitrage above the issuer
    boundary (below the holder one) is shown by an explicit strategy: the
    reflected hedge funded at the probe price, which must satisfy (AO) for
    every stopping time (holder: at the earliest rational exercise time).
    On the fair side, sampled strategies must all fail to produce an arbitrage.
    """
    rng = np.random.default_rng(seed)
    samples = [random_strategy(tree, rng) for _ in range(n_samples)]
    holder = side == "holder"
    if holder:
        acc = holder_acceptable_price(tree, gen, contract, endowment.x2, benchmark)
        tau_h = _first_contact(acc.solution)
        x = resolve_benchmark(tree, endowment.x2, benchmark)
        target = [b + h for b, h in zip(x, contract.payoff)]
        capacity = holder_min_cost_over_tau(tree, gen, -contract.flows, target)
        kind = ConditionKind("AO'")
    else:
        acc = issuer_acceptable_price(tree, gen, contract, endowment.x1, benchmark)
        x = resolve_benchmark(tree, endowment.x1, benchmark)
        floor = [b - h for b, h in zip(x, contract.payoff)]
        capacity = min_superhedge_cost(tree, gen, contract.flows, floor)
        kind = ConditionKind("AO")
    boundary = acc.price
    if probe_prices is None:
        probe_prices = default_probes(boundary)
    ctol = 0 if tree.exact else 1e-9
    results = []
    for p in probe_prices:
        if holder:
            fair = to_float(endowment.x2 - p) <= capacity + tol
            expected = FAIR if p >= boundary else ARBITRAGE
        else:
            fair = to_float(endowment.x1 + p) <= capacity + tol
            expected = FAIR if p <= boundary else ARBITRAGE
        if fair:
            # no sampled strategy may exhibit an arbitrage at a fair price
            witness = any(
                check_condition(kind, tree, gen, contract, endowment, p, z, None, benchmark, ctol)
                for z in samples + [acc.solution.Z]
            )
            cls = INCONSISTENT if witness else FAIR
        else:
            tau = tau_h if holder else None
            ok = check_condition(kind, tree, gen, contract, endowment, p, acc.solution.Z,
                                 tau, benchmark, ctol)
            cls = ARBITRAGE if ok else INCONSISTENT
        results.append(ProbeResult(side, p, cls, expected))
    report = IntervalReport(side, boundary, tuple(results))
    if raise_on_violation and not report.ok:
        bad = [r for r in results if not r.ok]
        raise TheoremViolation(f"{side} fair/arbitrage classification flips off the boundary: {bad}")
    return report


def _first_contact(sol):
    from .reflected import first_contact_time

    return first_contact_time(sol, 0 if sol.tree.exact else 1e-9)


# -- sampled logic and property sweeps --------------------------------------------------

@dataclass(frozen=True)
class SampledCheck:
    """Outcome of a sampled universal claim; never a proof."""

    name: str
    samples: int
    seed: int
    violations: int

    @property
    def ok(self) -> bool:
        return self.violations == 0


def check_superhedge_break_even_logic(tree: EventTree, gen: Generator, contract: ContractSpec,
                                      endowment: Endowments, n_samples: int = 1000,
                                      seed: int = 0, slope_bound: float = 3.0,
                                      benchmark=None) -> SampledCheck:
    """Sampled check that (SH) plus (NA) at tau forces (BE) at tau, and that a
    pair failing (SH) leaves some stopping time with (NA).

    Prices are drawn around the issuer's acceptable price so both branches occur.
    """
    rng = np.random.default_rng(seed)
    taus = enumerate_stopping_times(tree)
    p0 = to_float(issuer_acceptable_price(tree, gen, contract, endowment.x1, benchmark).price)
    tol = 1e-9
    sh, na, be = ConditionKind("SH"), ConditionKind("NA"), ConditionKind("BE")
    violations = 0
    for _ in range(n_samples):
        z = random_strategy(tree, rng, slope_bound)
        p = p0 + float(rng.uniform(-2.0, 2.0))
        gap = trader_gap(sh, tree, gen, contract, endowment, p, z, benchmark)
        if conditions.for_pair(sh, tree, gap, tol):
            for tau in taus:
                if conditions.at_stop(na, gap, tau.stop_set, tol) and \
                        not conditions.at_stop(be, gap, tau.stop_set, tol):
                    violations += 1
        elif not any(conditions.at_stop(na, gap, tau.stop_set, tol) for tau in taus):
            violations += 1
    return SampledCheck("superhedge_break_even_logic", n_samples, seed, violations)


def check_forward_monotonicity_sampled(tree: EventTree, gen: Generator, flows: CashFlowProcess,
                                       n_samples: int = 200, seed: int = 0) -> SampledCheck:
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(n_samples):
        z = random_strategy(tree, rng)
        lo = float(rng.uniform(-50, 50))
        hi = lo + float(rng.uniform(1e-3, 10))
        if not verify_forward_monotonicity(tree, gen, z, flows, lo, hi):
            violations += 1
    return SampledCheck("forward_monotonicity", n_samples, seed, violations)


def random_stopping_time(tree: EventTree, rng: np.random.Generator, p_stop: float = 0.4
                         ) -> StoppingTime:
    stops, stack = [], [0]
    while stack:
        v = stack.pop()
        if tree.is_leaf(v) or rng.random() < p_stop:
            stops.append(v)
        else:
            stack.extend(tree.children[v])
    return StoppingTime(stops)


def comparison_sweep(tree: EventTree, gen: Generator, flows: CashFlowProcess,
                     n_pairs: int = 1000, seed: int = 0, force: bool = False,
                     n_times: int = 16) -> SampledCheck:
    """Random ordered terminal pairs at random stopping times; counts order violations.

    The pairs are spread over ``n_times`` randomly drawn stopping times.

    Refuses (raises :class:`ComparisonUnavailable`) when one-step monotonicity
    fails unless ``force`` is set.
    """
    if not force:
        mono = check_one_step_monotonicity(tree, gen)
        if not mono:
            raise ComparisonUnavailable(
                f"one-step monotonicity fails at node {mono.node}; comparison is not available"
            )
    rng = np.random.default_rng(seed)
    taus = [random_stopping_time(tree, rng) for _ in range(n_times)]
    choice = rng.integers(0, len(taus), n_pairs)
    exact = tree.exact and all(isinstance(x, (int, Fraction)) for x in flows.increments)
    violations = 0
    for t_idx in np.unique(choice):
        tau = taus[int(t_idx)]
        m = int(np.sum(choice == t_idx))
        base = rng.integers(-400, 400, size=(len(tau), m))
        bump = rng.integers(0, 40, size=(len(tau), m)) * (rng.random((len(tau), m)) < 0.5)
        if exact:
            conv = np.vectorize(lambda k: Fraction(int(k), 8), otypes=[object])
        else:
            conv = np.vectorize(lambda k: k / 8.0, otypes=[float])
        z2 = {v: conv(base[i]) for i, v in enumerate(tau)}
        z1 = {v: conv(base[i] + bump[i]) for i, v in enumerate(tau)}
        y1, _ = backward(tree, gen, flows, tau, z1)
        y2, _ = backward(tree, gen, flows, tau, z2)
        tol = 0 if exact else 1e-9
        bad = np.zeros(m, dtype=bool)
        for v, (a, b) in enumerate(zip(y1, y2)):
            if a is None:
                continue
            bad |= np.asarray(np.asarray(a) < np.asarray(b) - tol, dtype=bool)
        # strict comparison: a strict increase at a stop node must show at the root
        differs = np.zeros(m, dtype=bool)
        for i in range(len(tau)):
            differs |= bump[i] > 0
        if 0 not in tau.stop_set:
            strict_fail = differs & ~np.asarray(np.asarray(y1[0]) > np.asarray(y2[0]), dtype=bool)
            bad |= strict_fail
        violations += int(bad.sum())
    return SampledCheck("comparison", n_pairs, seed, violations)


__all__ = [
    "BracketError",
    "ComparisonUnavailable",
    "IntervalReport",
    "OracleError",
    "ProbeResult",
    "SampledCheck",
    "StoppingValue",
    "check_condition",
    "check_forward_monotonicity_sampled",
    "check_superhedge_break_even_logic",
    "comparison_sweep",
    "default_probes",
    "holder_min_cost_literal",
    "holder_min_cost_over_tau",
    "inf_over_stopping_times",
    "min_superhedge_cost",
    "random_stopping_time",
    "random_strategy",
    "stopping_values_literal",
    "sup_over_stopping_times",
    "trader_gap",
    "verify_interval_structure",
]
