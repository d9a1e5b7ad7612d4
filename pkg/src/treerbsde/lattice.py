"""Finite event trees, adapted processes and stopping times.

A tree is stored as flat tuples indexed by node id. Ids run from 0 (the root)
upwards and every parent id is smaller than its children's ids, so iterating
``reversed(range(tree.n_nodes))`` is a valid backward sweep.

Adapted processes are plain sequences indexed by node id. Predictable processes
(hedges, cash-flow increments) are sequences indexed by the node at the *start*
of a step; their value at a leaf is unused.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import product
from typing import Iterable, Iterator, Mapping, Sequence

from .numeric import all_exact, decode, encode, to_exact

DEFAULT_BUDGET = 10**6
BUDGET_ENV_VAR = "TREERBSDE_ENUM_BUDGET"


class TreeError(ValueError):
    """Malformed tree or invalid tree-building parameters."""


class EnumerationBudgetExceeded(RuntimeError):
    def __init__(self, count: int, budget: int):
        self.count = count
        self.budget = budget
        super().__init__(
            f"enumeration refused: {count} stopping times exceed the budget of {budget}"
        )


def default_budget() -> int:
    raw = os.environ.get(BUDGET_ENV_VAR)
    return int(raw) if raw else DEFAULT_BUDGET


@dataclass(frozen=True)
class EventTree:
    parent: tuple
    children: tuple
    probs: tuple
    level: tuple
    prices: tuple
    times: tuple

    def __post_init__(self):
        n = len(self.parent)
        if not (len(self.children) == len(self.probs) == len(self.level) == len(self.prices) == n):
            raise TreeError("node arrays have inconsistent lengths")
        if n == 0 or self.parent[0] is not None or self.level[0] != 0:
            raise TreeError("node 0 must be the unique root at time index 0")
        if any(p is None for p in self.parent[1:]):
            raise TreeError("exactly one root is allowed")
        N = len(self.times) - 1
        if N < 1:
            raise TreeError("time grid needs at least two points")
        if self.times[0] != 0 or any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise TreeError("time grid must start at 0 and be strictly increasing")
        dims = {len(p) for p in self.prices}
        if len(dims) != 1 or 0 in dims:
            raise TreeError("every node needs a price vector of the same dimension")
        for v in range(n):
            kids = self.children[v]
            if len(kids) != len(self.probs[v]):
                raise TreeError(f"node {v}: one probability per child required")
            if not kids:
                if self.level[v] != N:
                    raise TreeError(f"leaf {v} is not at the final time index {N}")
                continue
            if len(kids) < 2:
                raise TreeError(f"node {v} has a single child")
            for c in kids:
                if c <= v or self.parent[c] != v or self.level[c] != self.level[v] + 1:
                    raise TreeError(f"node {v}: inconsistent child {c}")
            if any(p <= 0 for p in self.probs[v]):
                raise TreeError(f"node {v}: branch probabilities must be positive")
            total = sum(self.probs[v])
            if abs(total - 1) > (0 if all_exact(*self.probs[v]) else 1e-12):
                raise TreeError(f"node {v}: child probabilities sum to {total}, not 1")
            if self.dim == 1:
                spots = [self.prices[c][0] for c in kids]
                if len(set(spots)) != len(spots):
                    raise TreeError(f"node {v}: child prices must be distinct")

    # -- basic geometry -------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    @property
    def depth(self) -> int:
        return len(self.times) - 1

    @property
    def dim(self) -> int:
        return len(self.prices[0])

    @property
    def exact(self) -> bool:
        return all_exact(*self.times, *(x for p in self.prices for x in p))

    def is_leaf(self, v: int) -> bool:
        return not self.children[v]

    @cached_property
    def leaves(self) -> tuple:
        return tuple(v for v in range(self.n_nodes) if not self.children[v])

    @cached_property
    def internal(self) -> tuple:
        return tuple(v for v in range(self.n_nodes) if self.children[v])

    def nodes_at(self, k: int) -> tuple:
        return tuple(v for v in range(self.n_nodes) if self.level[v] == k)

    def spot(self, v: int):
        """Price of the first (or only) risky asset at node ``v``."""
        return self.prices[v][0]

    def state(self, v: int):
        """Price argument handed to generators: scalar for one asset, tuple otherwise."""
        return self.prices[v][0] if self.dim == 1 else self.prices[v]

    def time(self, v: int):
        return self.times[self.level[v]]

    def dt(self, v: int):
        k = self.level[v]
        return self.times[k + 1] - self.times[k]

    @property
    def max_dt(self):
        return max(b - a for a, b in zip(self.times, self.times[1:]))

    def ancestors(self, v: int) -> list:
        """Strict ancestors of ``v``, root first."""
        out = []
        p = self.parent[v]
        while p is not None:
            out.append(p)
            p = self.parent[p]
        out.reverse()
        return out

    def path(self, v: int) -> list:
        return self.ancestors(v) + [v]

    def subtree(self, v: int) -> list:
        out, stack = [], [v]
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(self.children[n])
        return sorted(out)

    def node_probability(self, v: int):
        prob = 1
        while self.parent[v] is not None:
            p = self.parent[v]
            prob *= self.probs[p][self.children[p].index(v)]
            v = p
        return prob

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        nodes = []
        for v in range(self.n_nodes):
            nodes.append(
                {
                    "id": v,
                    "k": self.level[v],
                    "parent": self.parent[v],
                    "children": [
                        {"id": c, "prob": encode(p)}
                        for c, p in zip(self.children[v], self.probs[v])
                    ],
                    "price": [encode(x) for x in self.prices[v]],
                }
            )
        return {"time_grid": [encode(t) for t in self.times], "nodes": nodes}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: Mapping, exact: bool = False) -> "EventTree":
        try:
            raw_nodes = sorted(data["nodes"], key=lambda nd: nd["id"])
            times = tuple(decode(t, exact) for t in data["time_grid"])
        except (KeyError, TypeError) as exc:
            raise TreeError(f"bad tree document: {exc}") from None
        ids = [nd["id"] for nd in raw_nodes]
        if ids != list(range(len(ids))):
            raise TreeError("node ids must be 0..n-1")
        parent, children, probs, level, prices = [], [], [], [], []
        for nd in raw_nodes:
            parent.append(nd["parent"])
            level.append(int(nd["k"]))
            kids = nd.get("children", [])
            children.append(tuple(int(c["id"]) for c in kids))
            probs.append(tuple(decode(c["prob"], exact) for c in kids))
            prices.append(tuple(decode(x, exact) for x in nd["price"]))
        return cls(tuple(parent), tuple(children), tuple(probs), tuple(level), tuple(prices), times)

    @classmethod
    def from_json(cls, text: str, exact: bool = False) -> "EventTree":
        return cls.from_dict(json.loads(text), exact=exact)


def build_binomial(s0, u, d, n_steps: int, maturity, probs=None) -> EventTree:
    """Non-recombining binomial tree with children ordered (up, down).

    ``probs`` is the up-probability (one half by default). If every numeric
    argument is an int or Fraction the tree is exact.
    """
    if n_steps < 1:
        raise TreeError("n_steps must be at least 1")
    if s0 <= 0:
        raise TreeError("s0 must be positive")
    if not u > d > 0:
        raise TreeError(f"need u > d > 0, got u={u}, d={d}")
    if maturity <= 0:
        raise TreeError("maturity must be positive")
    exact = all_exact(s0, u, d, maturity) and (probs is None or all_exact(probs))
    if probs is None:
        probs = Fraction(1, 2) if exact else 0.5
    if not 0 < probs < 1:
        raise TreeError("up-probability must lie in (0, 1)")
    if exact:
        s0, u, d, maturity, probs = map(to_exact, (s0, u, d, maturity, probs))
        times = tuple(maturity * Fraction(k, n_steps) for k in range(n_steps + 1))
    else:
        s0, u, d, maturity, probs = map(float, (s0, u, d, maturity, probs))
        times = tuple(maturity * k / n_steps for k in range(n_steps + 1))
    parent, level, prices = [None], [0], [(s0,)]
    children, pr = [], []
    frontier = [0]
    for k in range(1, n_steps + 1):
        nxt = []
        for v in frontier:
            s = prices[v][0]
            kids = []
            for factor in (u, d):
                kids.append(len(parent))
                parent.append(v)
                level.append(k)
                prices.append((s * factor,))
            nxt.extend(kids)
        frontier = nxt
    children = [()] * len(parent)
    pr = [()] * len(parent)
    for c in range(1, len(parent)):
        v = parent[c]
        first = not children[v]
        children[v] += (c,)
        pr[v] += (probs if first else 1 - probs,)
    return EventTree(tuple(parent), tuple(children), tuple(pr), tuple(level), tuple(prices), times)


def conditional_expectation(tree: EventTree, values: Sequence, node: int):
    """Probability-weighted average of ``values`` over the children of ``node``."""
    kids = tree.children[node]
    if not kids:
        raise TreeError(f"node {node} is a leaf")
    return sum(p * values[c] for c, p in zip(kids, tree.probs[node]))


# -- stopping times -------------------------------------------------------

@dataclass(frozen=True)
class StoppingTime:
    """Exercise rule given by the set of nodes where it stops."""

    stop_set: frozenset

    def __init__(self, nodes: Iterable[int]):
        object.__setattr__(self, "stop_set", frozenset(int(v) for v in nodes))

    def __contains__(self, v) -> bool:
        return v in self.stop_set

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.stop_set))

    def __len__(self) -> int:
        return len(self.stop_set)

    def __repr__(self) -> str:
        return f"StoppingTime({sorted(self.stop_set)})"

    def nodes(self) -> list:
        return sorted(self.stop_set)


def at_root(tree: EventTree) -> StoppingTime:
    return StoppingTime([0])


def at_maturity(tree: EventTree) -> StoppingTime:
    return StoppingTime(tree.leaves)


def at_time(tree: EventTree, k: int) -> StoppingTime:
    return StoppingTime(tree.nodes_at(k))


def validate_stopping_time(tree: EventTree, st: StoppingTime) -> bool:
    """True iff the stop set is an antichain meeting every root-to-leaf path."""
    stops = st.stop_set
    if any(not (0 <= v < tree.n_nodes) for v in stops):
        return False
    for leaf in tree.leaves:
        if sum(1 for v in tree.path(leaf) if v in stops) != 1:
            return False
    return True


def before_nodes(tree: EventTree, st: StoppingTime) -> list:
    """Nodes strictly before the stopping time, in increasing id order."""
    out, stack = [], [0]
    while stack:
        v = stack.pop()
        if v in st.stop_set:
            continue
        out.append(v)
        stack.extend(tree.children[v])
    return sorted(out)


def precedes(tree: EventTree, a: StoppingTime, b: StoppingTime) -> bool:
    """True iff ``a <= b`` pathwise."""
    return all(any(u in a.stop_set for u in tree.path(v)) for v in b.stop_set)


def count_stopping_times(tree: EventTree, from_time_index: int = 0) -> int:
    counts = [0] * tree.n_nodes
    for v in reversed(range(tree.n_nodes)):
        kids = tree.children[v]
        cont = math.prod(counts[c] for c in kids) if kids else 0
        counts[v] = cont + (1 if tree.level[v] >= from_time_index else 0)
    return counts[0]


def enumerate_stopping_times(tree: EventTree, from_time_index: int = 0,
                             budget: int | None = None) -> list:
    """All stopping times with values in {t_k : k >= from_time_index}."""
    budget = default_budget() if budget is None else budget
    total = count_stopping_times(tree, from_time_index)
    if total > budget:
        raise EnumerationBudgetExceeded(total, budget)
    options: list = [None] * tree.n_nodes
    for v in reversed(range(tree.n_nodes)):
        kids = tree.children[v]
        opts = [frozenset((v,))] if tree.level[v] >= from_time_index else []
        if kids:
            for combo in product(*(options[c] for c in kids)):
                opts.append(frozenset().union(*combo))
        options[v] = opts
        for c in kids:
            options[c] = None
    return [StoppingTime(s) for s in options[0]]


def first_hitting(tree: EventTree, hit: Sequence[bool]) -> StoppingTime:
    """Per path, the first node flagged in ``hit``; leaves are used if none is."""
    stops, stack = [], [0]
    while stack:
        v = stack.pop()
        if hit[v] or tree.is_leaf(v):
            stops.append(v)
        else:
            stack.extend(tree.children[v])
    return StoppingTime(stops)


def cumulative(tree: EventTree, increments: Sequence, strict: bool = True) -> list:
    """Path sums of per-node increments.

    With ``strict=True`` the value at ``v`` sums increments of its strict
    ancestors, i.e. increments attached to steps that end at or before ``v``.
    """
    out = [0] * tree.n_nodes
    for v in range(1, tree.n_nodes):
        p = tree.parent[v]
        out[v] = out[p] + increments[p]
    if not strict:
        out = [out[v] + increments[v] for v in range(tree.n_nodes)]
    return out


def to_exact_tree(tree: EventTree) -> EventTree:
    return EventTree(
        tree.parent,
        tree.children,
        tuple(tuple(to_exact(p) for p in ps) for ps in tree.probs),
        tree.level,
        tuple(tuple(to_exact(x) for x in p) for p in tree.prices),
        tuple(to_exact(t) for t in tree.times),
    )
