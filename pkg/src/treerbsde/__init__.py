"""American contracts in nonlinear markets on finite event trees.

Acceptable prices come from reflected BSDEs solved backward on the tree;
every answer can be cross-checked against brute-force oracles in
:mod:`treerbsde.oracle`.
"""

from .evaluation import (
    BsdeSolution,
    check_comparison,
    check_one_step_monotonicity,
    evaluate,
    solve_bsde,
)
from .generators import (
    CashFlowProcess,
    Endowments,
    Generator,
    RateSchedule,
    benchmark_wealth,
    discount_generator,
    forward_wealth,
    funding_generator,
    linear_generator,
    make_generator,
    verify_forward_monotonicity,
    zero_generator,
)
from .lattice import (
    EventTree,
    StoppingTime,
    build_binomial,
    conditional_expectation,
    enumerate_stopping_times,
    validate_stopping_time,
)
from .pricing import (
    ContractSpec,
    PriceReport,
    classify_break_even,
    holder_acceptable_price,
    holder_relative_reward,
    issuer_acceptable_price,
    issuer_relative_reward,
    price_contract,
    rational_exercise_times,
)
from .reflected import (
    RbsdeSolution,
    first_contact_time,
    latest_exercise_time,
    solve_reflected_lower,
    solve_reflected_upper,
)

__version__ = "0.1.0"

__all__ = [
    "BsdeSolution",
    "CashFlowProcess",
    "ContractSpec",
    "Endowments",
    "EventTree",
    "Generator",
    "PriceReport",
    "RateSchedule",
    "RbsdeSolution",
    "StoppingTime",
    "benchmark_wealth",
    "build_binomial",
    "check_comparison",
    "check_one_step_monotonicity",
    "classify_break_even",
    "conditional_expectation",
    "discount_generator",
    "enumerate_stopping_times",
    "evaluate",
    "first_contact_time",
    "forward_wealth",
    "funding_generator",
    "holder_acceptable_price",
    "holder_relative_reward",
    "issuer_acceptable_price",
    "issuer_relative_reward",
    "latest_exercise_time",
    "linear_generator",
    "make_generator",
    "price_contract",
    "rational_exercise_times",
    "solve_bsde",
    "solve_reflected_lower",
    "solve_reflected_upper",
    "validate_stopping_time",
    "verify_forward_monotonicity",
    "zero_generator",
]
