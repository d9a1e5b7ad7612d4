"""Contract-level pricing: acceptable prices, hedges, break-even and exercise times."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

from . import conditions
from .evaluation import check_one_step_monotonicity, evaluate
from .generators import (
    CashFlowProcess,
    Generator,
    RateSchedule,
    benchmark_wealth,
    forward_wealth,
)
from .lattice import (
    EnumerationBudgetExceeded,
    EventTree,
    StoppingTime,
    enumerate_stopping_times,
)
from .numeric import close
from .reflected import (
    LatestExercise,
    RbsdeSolution,
    first_contact_time,
    latest_exercise_time,
    solve_reflected_lower,
    solve_reflected_upper,
)

log = logging.getLogger(__name__)

FLOAT_TOL = 1e-9


class TheoremViolation(AssertionError):
    """A consequence of the pricing theorems failed: indicates a solver bug."""


@dataclass(frozen=True)
class ContractSpec:
    """American contract seen from the issuer.

    ``payoff`` is X^h, the issuer's cash flow at exercise (negative when the
    issuer pays), ``flows`` the running cash flows A received by the issuer.
    """

    payoff: tuple
    flows: CashFlowProcess

    def __post_init__(self):
        if len(self.payoff) != len(self.flows.increments):
            raise ValueError("payoff and flows must cover the same nodes")

    @classmethod
    def from_functions(cls, tree: EventTree, payoff: Callable[[int], object],
                       flows: Callable[[int], object] | None = None) -> "ContractSpec":
        a = CashFlowProcess.from_function(tree, flows) if flows else CashFlowProcess.zero(tree)
        return cls(tuple(payoff(v) for v in range(tree.n_nodes)), a)


def default_tol(tree: EventTree, *xs) -> float:
    from .numeric import all_exact

    return 0 if tree.exact and all_exact(*xs) else FLOAT_TOL


def resolve_benchmark(tree: EventTree, x, benchmark) -> list:
    """Benchmark wealth of a trader with endowment ``x``.

    ``benchmark`` may be a :class:`RateSchedule`, an explicit node-indexed
    process, a callable ``x -> process``, or ``None`` (zero rates).
    """
    if benchmark is None:
        return benchmark_wealth(tree, x, RateSchedule(0, 0))
    if isinstance(benchmark, RateSchedule):
        benchmark.check(tree)
        return benchmark_wealth(tree, x, benchmark)
    if callable(benchmark):
        return list(benchmark(x))
    values = list(benchmark)
    if len(values) != tree.n_nodes:
        raise ValueError("explicit benchmark must be defined on every node")
    return values


def issuer_relative_reward(contract: ContractSpec, benchmark: Sequence) -> list:
    return [b - h for b, h in zip(benchmark, contract.payoff)]


def holder_relative_reward(contract: ContractSpec, benchmark: Sequence) -> list:
    return [b + h for b, h in zip(benchmark, contract.payoff)]


class AcceptablePrice(NamedTuple):
    price: object
    solution: RbsdeSolution
    comparison_verified: bool


def issuer_acceptable_price(tree: EventTree, gen: Generator, contract: ContractSpec, x1,
                            benchmark=None) -> AcceptablePrice:
    """Issuer's acceptable price ``Y_0 - x1`` from the lower-obstacle RBSDE."""
    verified = bool(check_one_step_monotonicity(tree, gen))
    if not verified:
        log.warning("one-step monotonicity fails: issuer price is comparison_unverified")
    X = issuer_relative_reward(contract, resolve_benchmark(tree, x1, benchmark))
    sol = solve_reflected_lower(tree, gen, contract.flows, X)
    return AcceptablePrice(sol.Y0 - x1, sol, verified)


def holder_acceptable_price(tree: EventTree, gen: Generator, contract: ContractSpec, x2,
                            benchmark=None) -> AcceptablePrice:
    """Holder's acceptable price ``x2 - y_0`` from the upper-obstacle RBSDE with flows -A."""
    verified = bool(check_one_step_monotonicity(tree, gen))
    if not verified:
        log.warning("one-step monotonicity fails: holder price is comparison_unverified")
    x = holder_relative_reward(contract, resolve_benchmark(tree, x2, benchmark))
    sol = solve_reflected_upper(tree, gen, -contract.flows, x)
    return AcceptablePrice(x2 - sol.Y0, sol, verified)


# -- break-even classification ---------------------------------------------

BREAK_EVEN_FLAGS = ("break_even", "no_arbitrage", "wealth_hits_obstacle",
                    "martingale_contact", "optimal_stopping")


@dataclass(frozen=True)
class BreakEvenReport:
    tau: StoppingTime
    flags: dict

    @property
    def agree(self) -> bool:
        return len(set(self.flags.values())) == 1

    @property
    def value(self) -> bool:
        return all(self.flags.values())


@dataclass(frozen=True)
class BreakEvenContext:
    """Issuer solution and the hedged wealth it funds, shared across candidate times."""

    issuer: AcceptablePrice
    wealth: list
    gap: list
    k_cum: list


def break_even_context(tree: EventTree, gen: Generator, contract: ContractSpec, x1,
                       benchmark=None, issuer: AcceptablePrice | None = None
                       ) -> BreakEvenContext:
    if issuer is None:
        issuer = issuer_acceptable_price(tree, gen, contract, x1, benchmark)
    bench = resolve_benchmark(tree, x1, benchmark)
    V = forward_wealth(tree, x1 + issuer.price, issuer.solution.Z, contract.flows, gen)
    gap = conditions.issuer_gap(V, contract.payoff, bench)
    return BreakEvenContext(issuer, V, gap, issuer.solution.cumulative_K())


def classify_break_even(tree: EventTree, gen: Generator, contract: ContractSpec, x1,
                        tau: StoppingTime, benchmark=None, tol=None,
                        issuer: AcceptablePrice | None = None,
                        raise_on_disagreement: bool = True,
                        context: BreakEvenContext | None = None) -> BreakEvenReport:
    """Evaluate the five equivalent characterisations of an issuer break-even time.

    The hedge is the issuer's Z funded at ``x1 + p^i``. All five flags must
    agree; a disagreement raises :class:`TheoremViolation`. Pass a
    :class:`BreakEvenContext` to reuse the forward run across many times.
    """
    if tol is None:
        tol = default_tol(tree, x1)
    if context is None:
        context = break_even_context(tree, gen, contract, x1, benchmark, issuer)
    sol = context.issuer.solution
    V, gap, k_cum = context.wealth, context.gap, context.k_cum
    nodes = tau.nodes()
    flags = {
        "break_even": conditions.at_stop(conditions.ConditionKind("BE"), gap, nodes, tol),
        "no_arbitrage": conditions.at_stop(conditions.ConditionKind("NA"), gap, nodes, tol),
        "wealth_hits_obstacle": all(close(V[v], sol.obstacle[v], tol) for v in nodes),
        "martingale_contact": all(
            close(sol.Y[v], sol.obstacle[v], tol) and close(k_cum[v], 0, tol) for v in nodes
        ),
        "optimal_stopping": close(
            evaluate(tree, gen, contract.flows, tau, sol.obstacle), sol.Y0, tol
        ),
    }
    report = BreakEvenReport(tau, flags)
    if raise_on_disagreement and not report.agree:
        raise TheoremViolation(f"break-even characterisations disagree at {tau!r}: {flags}")
    return report


# -- holder exercise -----------------------------------------------------------

@dataclass(frozen=True)
class RationalExercise:
    times: list | None
    earliest: StoppingTime
    latest: LatestExercise
    predicate: Callable[[StoppingTime], bool] = field(repr=False)
    refused: str | None = None


def is_rational(sol: RbsdeSolution, tau: StoppingTime, tol=0) -> bool:
    """Contact with the obstacle at ``tau`` and no reflection before it."""
    k_cum = sol.cumulative_K()
    return all(
        close(sol.Y[v], sol.obstacle[v], tol) and close(k_cum[v], 0, tol) for v in tau
    )


def rational_exercise_times(tree: EventTree, gen: Generator, contract: ContractSpec, x2,
                            benchmark=None, budget: int | None = None, tol=None,
                            holder: AcceptablePrice | None = None) -> RationalExercise:
    if tol is None:
        tol = default_tol(tree, x2)
    if holder is None:
        holder = holder_acceptable_price(tree, gen, contract, x2, benchmark)
    sol = holder.solution

    def predicate(tau: StoppingTime) -> bool:
        return is_rational(sol, tau, tol)

    earliest = first_contact_time(sol, tol)
    latest = latest_exercise_time(sol, tol)
    try:
        family = enumerate_stopping_times(tree, budget=budget)
    except EnumerationBudgetExceeded as exc:
        return RationalExercise(None, earliest, latest, predicate, str(exc))
    return RationalExercise([t for t in family if predicate(t)], earliest, latest, predicate)


# -- report --------------------------------------------------------------------

@dataclass
class PriceReport:
    p_issuer: object
    p_holder: object
    tau_issuer_earliest: StoppingTime
    tau_holder_earliest: StoppingTime
    tau_holder_latest: StoppingTime
    issuer_hedge: list
    holder_hedge: list
    diagnostics: dict
    issuer_solution: RbsdeSolution = field(repr=False)
    holder_solution: RbsdeSolution = field(repr=False)

    def issuer_fair(self, p) -> bool:
        """Membership in the issuer's fair-price half-line (-inf, p^i]."""
        return p <= self.p_issuer

    def holder_fair(self, p) -> bool:
        """Membership in the holder's fair-price half-line [p^h, inf)."""
        return p >= self.p_holder


def price_contract(tree: EventTree, gen: Generator, contract: ContractSpec, x1=0, x2=0,
                   benchmark=None, tol=None) -> PriceReport:
    if tol is None:
        tol = default_tol(tree, x1, x2)
    iss = issuer_acceptable_price(tree, gen, contract, x1, benchmark)
    hol = holder_acceptable_price(tree, gen, contract, x2, benchmark)
    latest = latest_exercise_time(hol.solution, tol)
    p_lo, p_hi = sorted([iss.price, hol.price])
    diagnostics = {
        "comparison_verified": iss.comparison_verified and hol.comparison_verified,
        "issuer_K_total": sum(iss.solution.K_increments),
        "issuer_K_nodes": sum(1 for k in iss.solution.K_increments if k > tol),
        "holder_k_total": sum(hol.solution.K_increments),
        "holder_k_nodes": sum(1 for k in hol.solution.K_increments if k > tol),
        "wedge": iss.price - hol.price,
        "fair_interval": {
            "low": p_lo,
            "high": p_hi,
            "low_side": "issuer" if iss.price <= hol.price else "holder",
        },
        "latest_caveat": latest.caveat,
        "tau_holder_latest_rational": latest.rational_latest,
        "settlement": "the cash-flow increment into the exercise node is paid before the payoff",
    }
    return PriceReport(
        iss.price,
        hol.price,
        first_contact_time(iss.solution, tol),
        first_contact_time(hol.solution, tol),
        latest.time,
        iss.solution.Z,
        hol.solution.Z,
        diagnostics,
        iss.solution,
        hol.solution,
    )
