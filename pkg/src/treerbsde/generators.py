"""Drivers, wealth dynamics, benchmark wealth and cash flows.

Wealth follows the explicit tree recursion

    V(c) = V(n) - g(t_n, V(n), xi(n), S(n)) * dt + xi(n) . (S(c) - S(n)) + dA(n)

for every child ``c`` of ``n``. The backward solvers in :mod:`treerbsde.evaluation`
invert exactly this step, so a backward solution run forward reproduces itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .lattice import EventTree, cumulative
from .numeric import all_exact, where


class StabilityError(ValueError):
    """lipschitz_y * dt >= 1 somewhere on the tree."""


class PicardError(RuntimeError):
    def __init__(self, iterations: int, residual, node=None):
        self.iterations = iterations
        self.residual = residual
        self.node = node
        where_ = f" at node {node}" if node is not None else ""
        super().__init__(
            f"Picard iteration did not converge{where_} after {iterations} iterations "
            f"(last change {residual})"
        )


class ExactModeError(TypeError):
    """A generator without a closed-form step was used with exact numbers."""


def dot(z, s):
    if isinstance(s, tuple):
        return sum(zi * si for zi, si in zip(z, s))
    return z * s


def _pos(x):
    return where(x > 0, x, 0 * x)


@dataclass(frozen=True)
class Generator:
    """Driver ``g(t, y, z, s)`` of the wealth equation.

    ``lipschitz_z`` bounds the sensitivity to the cash value of the risky
    position: ``|g(t,y,z1,s) - g(t,y,z2,s)| <= lipschitz_z * |(z1 - z2) . s|``.

    ``implicit`` optionally gives the exact solution ``y`` of
    ``y - dt * g(t, y, z, s) = m``; without it the step is solved by Picard
    iteration, which is float-only.
    """

    evaluate: Callable
    lipschitz_y: float
    lipschitz_z: float
    label: str
    implicit: Callable | None = None
    params: dict = field(default_factory=dict)

    def __call__(self, t, y, z, s):
        return self.evaluate(t, y, z, s)

    def solve_implicit(self, t, m, z, s, dt, tol: float = 1e-12, max_iter: int = 200):
        if self.implicit is not None:
            return self.implicit(t, m, z, s, dt)
        if _has_exact(m) or _has_exact(dt):
            raise ExactModeError(
                f"generator {self.label!r} has no closed-form step; use float mode"
            )
        y = m
        for it in range(1, max_iter + 1):
            y_new = m + dt * self.evaluate(t, y, z, s)
            change = np.max(np.abs(np.asarray(y_new, dtype=float) - np.asarray(y, dtype=float)))
            y = y_new
            if change <= tol * max(1.0, float(np.max(np.abs(y)))):
                return y
        raise PicardError(max_iter, change)


def _has_exact(x) -> bool:
    if isinstance(x, np.ndarray):
        return x.dtype == object
    return all_exact(x)


def zero_generator() -> Generator:
    return Generator(lambda t, y, z, s: 0 * y, 0, 0, "zero",
                     implicit=lambda t, m, z, s, dt: m)


def discount_generator(r) -> Generator:
    """``g = -r y``: plain accrual at rate ``r`` ignoring the risky position."""
    if r < 0:
        raise ValueError("discount rate must be non-negative")
    return Generator(
        lambda t, y, z, s: -r * y,
        abs(r),
        0,
        f"discount(r={r})",
        implicit=lambda t, m, z, s, dt: m / (1 + r * dt),
        params={"r": r},
    )


@dataclass(frozen=True)
class RateSchedule:
    """Constant unsecured lending and borrowing rates per year."""

    r_lend: float
    r_borrow: float

    def __post_init__(self):
        if self.r_borrow < self.r_lend:
            raise ValueError("borrowing rate must be at least the lending rate")

    def check(self, tree: EventTree) -> None:
        if self.r_lend * tree.max_dt < -1:
            raise ValueError("lending rate times dt below -1: accrual factor not positive")

    @classmethod
    def flat(cls, r) -> "RateSchedule":
        return cls(r, r)


def funding_generator(rates: RateSchedule) -> Generator:
    """Differential lending/borrowing driver.

    With cash position ``psi = y - z . s``, ``g = -r_lend psi^+ + r_borrow psi^-``.
    """
    rl, rb = rates.r_lend, rates.r_borrow

    def g(t, y, z, s):
        psi = y - dot(z, s)
        return -rl * _pos(psi) + rb * _pos(-psi)

    def step(t, m, z, s, dt):
        # y - dt*g(y) is increasing and equals c at y = c, so the sign of m - c
        # tells which account is used
        c = dot(z, s)
        lend = (m + rl * dt * c) / (1 + rl * dt)
        borrow = (m + rb * dt * c) / (1 + rb * dt)
        return where(m >= c, lend, borrow)

    return Generator(
        g,
        max(abs(rl), abs(rb)),
        max(abs(rl), abs(rb)),
        f"funding(r_lend={rl}, r_borrow={rb})",
        implicit=step,
        params={"r_lend": rl, "r_borrow": rb},
    )


def linear_generator(r) -> Generator:
    """Single-rate market: ``g = -r (y - z . s)``."""
    return funding_generator(RateSchedule(r, r))


GENERATORS: dict = {
    "zero": lambda: zero_generator(),
    "discount": lambda r: discount_generator(r),
    "funding": lambda r_lend, r_borrow: funding_generator(RateSchedule(r_lend, r_borrow)),
    "linear": lambda r: linear_generator(r),
}


def register_generator(name: str, factory: Callable[..., Generator]) -> None:
    GENERATORS[name] = factory


def make_generator(name: str, **params) -> Generator:
    try:
        factory = GENERATORS[name]
    except KeyError:
        raise KeyError(f"unknown generator {name!r}; known: {sorted(GENERATORS)}") from None
    return factory(**params)


def check_stability(tree: EventTree, gen: Generator) -> None:
    if gen.lipschitz_y * tree.max_dt >= 1:
        raise StabilityError(
            f"{gen.label}: lipschitz_y * dt = {gen.lipschitz_y * tree.max_dt} must be < 1"
        )


def probe_lipschitz(gen: Generator, rng: np.random.Generator, spots: Sequence[float],
                    n: int = 200, scale: float = 100.0) -> tuple:
    """Largest secant ratios in y and in z.s seen on random probes."""
    worst_y = worst_z = 0.0
    for _ in range(n):
        s = float(rng.choice(spots))
        t = float(rng.uniform(0, 1))
        y1, y2 = rng.uniform(-scale, scale, 2)
        z1, z2 = rng.uniform(-scale / s, scale / s, 2)
        if y1 != y2:
            worst_y = max(worst_y, abs(gen(t, y1, z1, s) - gen(t, y2, z1, s)) / abs(y1 - y2))
        if z1 != z2:
            worst_z = max(worst_z, abs(gen(t, y1, z1, s) - gen(t, y1, z2, s)) / abs((z1 - z2) * s))
    return worst_y, worst_z


# -- cash flows -------------------------------------------------------------

@dataclass(frozen=True)
class CashFlowProcess:
    """Predictable cash-flow increments: ``increments[n]`` is paid on every step out of ``n``."""

    increments: tuple

    def __neg__(self) -> "CashFlowProcess":
        return CashFlowProcess(tuple(-x for x in self.increments))

    def __getitem__(self, v):
        return self.increments[v]

    def cumulative(self, tree: EventTree) -> list:
        return cumulative(tree, self.increments)

    @classmethod
    def zero(cls, tree: EventTree) -> "CashFlowProcess":
        return cls(tuple(0 for _ in range(tree.n_nodes)))

    @classmethod
    def from_function(cls, tree: EventTree, fn: Callable[[int], object]) -> "CashFlowProcess":
        return cls(tuple(fn(v) if tree.children[v] else 0 for v in range(tree.n_nodes)))


@dataclass(frozen=True)
class Endowments:
    x1: float = 0
    x2: float = 0


def forward_wealth(tree: EventTree, y0, strategy: Sequence, flows: CashFlowProcess,
                   gen: Generator) -> list:
    V = [None] * tree.n_nodes
    V[0] = y0
    for n in tree.internal:
        v, xi, s = V[n], strategy[n], tree.state(n)
        base = v - gen(tree.time(n), v, xi, s) * tree.dt(n) + flows[n]
        for c in tree.children[n]:
            V[c] = base + dot(xi, _diff(tree.state(c), s))
    return V


def _diff(a, b):
    if isinstance(a, tuple):
        return tuple(x - y for x, y in zip(a, b))
    return a - b


def benchmark_wealth(tree: EventTree, x, rates: RateSchedule) -> list:
    """Cash endowment ``x`` left in the lending (x >= 0) or borrowing account."""
    r = rates.r_lend if x >= 0 else rates.r_borrow
    level_value = [x]
    for k in range(tree.depth):
        level_value.append(level_value[-1] * (1 + r * (tree.times[k + 1] - tree.times[k])))
    return [level_value[tree.level[v]] for v in range(tree.n_nodes)]


class MonotonicityCheck(NamedTuple):
    ok: bool
    node: int | None

    def __bool__(self):
        return self.ok


def verify_forward_monotonicity(tree: EventTree, gen: Generator, strategy: Sequence,
                                flows: CashFlowProcess, y_low, y_high) -> MonotonicityCheck:
    if not y_high > y_low:
        raise ValueError("need y_high > y_low")
    lo = forward_wealth(tree, y_low, strategy, flows, gen)
    hi = forward_wealth(tree, y_high, strategy, flows, gen)
    for v in range(tree.n_nodes):
        if not hi[v] > lo[v]:
            return MonotonicityCheck(False, v)
    return MonotonicityCheck(True, None)
