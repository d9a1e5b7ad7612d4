"""Nonlinear g-evaluations: backward BSDE solves on the tree up to a stopping time."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .generators import (
    CashFlowProcess,
    Generator,
    MonotonicityCheck,
    PicardError,
    check_stability,
    dot,
)
from .lattice import EventTree, StoppingTime, before_nodes, validate_stopping_time
from .numeric import all_exact

PICARD_TOL = 1e-12


class RepresentationError(ValueError):
    """A node's children do not span the hedge exactly (need d + 1 children, full rank)."""


class InvalidStoppingTime(ValueError):
    pass


def _invert(matrix: list) -> list:
    """Gauss-Jordan inverse that works for floats and Fractions alike."""
    n = len(matrix)
    a = [list(row) + [1 if i == j else 0 for j in range(n)] for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(a[r][col]))
        if a[pivot][col] == 0:
            raise RepresentationError("price spreads are not of full rank")
        a[col], a[pivot] = a[pivot], a[col]
        p = a[col][col]
        # int / int would silently produce a float
        inv_p = Fraction(1, p) if isinstance(p, int) else 1 / p
        a[col] = [x * inv_p for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]


def _representation(tree: EventTree, n: int) -> list:
    """Rows mapping child values to (drift-adjusted level, z_1..z_d)."""
    cache = tree.__dict__.setdefault("_repr_cache", {})
    if n in cache:
        return cache[n]
    kids = tree.children[n]
    d = tree.dim
    if len(kids) != d + 1:
        raise RepresentationError(
            f"node {n}: {len(kids)} children for {d} asset(s); exact hedging needs {d + 1}"
        )
    s = tree.prices[n]
    rows = [[1] + [tree.prices[c][j] - s[j] for j in range(d)] for c in kids]
    inv = _invert(rows)
    cache[n] = inv
    return inv


def one_step(tree: EventTree, gen: Generator, n: int, child_values: Sequence, dA=0,
             tol: float = PICARD_TOL):
    """Invert one wealth step at node ``n``.

    Returns ``(y, z)`` such that for every child ``c``
    ``child_values[c] = y - g(t, y, z, s) dt + z . (S(c) - S(n)) + dA``.
    Child values may be numpy arrays; results broadcast.
    """
    kids = tree.children[n]
    s = tree.state(n)
    if tree.dim == 1 and len(kids) == 2:
        c0, c1 = kids
        v0, v1 = child_values
        s0, s1 = tree.prices[c0][0], tree.prices[c1][0]
        z = (v0 - v1) / (s0 - s1)
        m = v0 - z * (s0 - s) - dA
    else:
        inv = _representation(tree, n)
        shifted = [v - dA for v in child_values]
        coeffs = [sum(w * v for w, v in zip(row, shifted)) for row in inv]
        m = coeffs[0]
        z = coeffs[1] if tree.dim == 1 else tuple(coeffs[1:])
    try:
        y = gen.solve_implicit(tree.time(n), m, z, s, tree.dt(n), tol=tol)
    except PicardError as exc:
        raise PicardError(exc.iterations, exc.residual, node=n) from None
    return y, z


@dataclass(frozen=True)
class BsdeSolution:
    Y: list
    Z: list
    terminal: StoppingTime
    terminal_values: dict

    @property
    def Y0(self):
        return self.Y[0]


def _terminal_map(tree: EventTree, terminal: StoppingTime, zeta) -> dict:
    if isinstance(zeta, Mapping):
        if set(zeta) != set(terminal.stop_set):
            raise ValueError("terminal values must be given exactly on the stop set")
        return {v: zeta[v] for v in terminal}
    return {v: zeta[v] for v in terminal}


def backward(tree: EventTree, gen: Generator, flows: CashFlowProcess,
             terminal: StoppingTime, values: Mapping, tol: float = PICARD_TOL):
    """Unchecked backward sweep; ``values`` may hold arrays (batched terminals)."""
    Y = [None] * tree.n_nodes
    Z = [None] * tree.n_nodes
    for v in terminal.stop_set:
        Y[v] = values[v]
    for n in reversed(before_nodes(tree, terminal)):
        Y[n], Z[n] = one_step(tree, gen, n, [Y[c] for c in tree.children[n]], flows[n], tol)
    return Y, Z


def solve_bsde(tree: EventTree, gen: Generator, flows: CashFlowProcess,
               terminal: StoppingTime, zeta, tol: float = PICARD_TOL) -> BsdeSolution:
    """Solve the BSDE with driver ``gen`` and cash flows ``flows`` back from ``terminal``.

    ``zeta`` is either a mapping on the stop set or a full node-indexed process.
    Nodes after the stopping time carry ``None``.
    """
    if not validate_stopping_time(tree, terminal):
        raise InvalidStoppingTime(f"{terminal!r} is not a stopping time of this tree")
    check_stability(tree, gen)
    tv = _terminal_map(tree, terminal, zeta)
    Y, Z = backward(tree, gen, flows, terminal, tv, tol)
    return BsdeSolution(Y, Z, terminal, tv)


def evaluate(tree: EventTree, gen: Generator, flows: CashFlowProcess,
             tau: StoppingTime, zeta, tol: float = PICARD_TOL):
    return solve_bsde(tree, gen, flows, tau, zeta, tol).Y0


@dataclass(frozen=True)
class Comparison:
    ordered: bool
    strictly_ordered: bool
    violated_at: int | None

    @property
    def violated(self) -> bool:
        return self.violated_at is not None


def check_comparison(tree: EventTree, gen: Generator, flows: CashFlowProcess,
                     tau: StoppingTime, zeta1, zeta2, tol: float | None = None) -> Comparison:
    """Compare the evaluations of two ordered terminal values (``zeta1 >= zeta2``)."""
    if tol is None:
        tol = 0 if tree.exact else 1e-12
    z1 = _terminal_map(tree, tau, zeta1)
    z2 = _terminal_map(tree, tau, zeta2)
    if any(z1[v] < z2[v] for v in tau):
        raise ValueError("precondition violated: zeta1 must dominate zeta2 on the stop set")
    s1 = solve_bsde(tree, gen, flows, tau, z1)
    s2 = solve_bsde(tree, gen, flows, tau, z2)
    violated_at = None
    for n in reversed(before_nodes(tree, tau)):
        if s1.Y[n] < s2.Y[n] - tol:
            violated_at = n
            break
    differ = any(z1[v] != z2[v] for v in tau)
    ordered = s1.Y0 >= s2.Y0 - tol
    strictly = differ and s1.Y0 > s2.Y0
    return Comparison(ordered, strictly, violated_at)


def check_one_step_monotonicity(tree: EventTree, gen: Generator, n_probes: int = 24,
                                seed: int = 0) -> MonotonicityCheck:
    """Check that every node's backward step is strictly increasing in each child value.

    Positive implied weights are what makes the strict comparison property hold
    on the tree. Slopes are probed by secants at ``n_probes`` base points per
    node; for piecewise-affine generators in exact mode the secants are exact.
    """
    rng = np.random.default_rng(seed)
    exact = tree.exact and all_exact(*gen.params.values())
    try:
        check_stability(tree, gen)
    except ValueError:
        return MonotonicityCheck(False, 0)
    for n in tree.internal:
        kids = tree.children[n]
        scale = 1 + max(abs(x) for c in kids + (n,) for x in tree.prices[c])
        base = rng.uniform(-2 * scale, 2 * scale, size=(len(kids), n_probes))
        base[:, 0] = 0.0
        if exact:
            base = np.vectorize(lambda x: Fraction(round(x * 64), 64), otypes=[object])(base)
            step = Fraction(1, 1000) * int(scale)
        else:
            step = 1e-3 * scale
        y0, _ = one_step(tree, gen, n, list(base), 0)
        for i in range(len(kids)):
            bumped = list(base)
            bumped[i] = base[i] + step
            y1, _ = one_step(tree, gen, n, bumped, 0)
            if not np.all(np.asarray(y1 - y0 > 0, dtype=bool)):
                return MonotonicityCheck(False, n)
    return MonotonicityCheck(True, None)


def implied_weights(tree: EventTree, n: int) -> list:
    """Weights of the zero-driver step at ``n`` (the linear pricing measure)."""
    inv = _representation(tree, n)
    return list(inv[0])


__all__ = [
    "BsdeSolution",
    "Comparison",
    "InvalidStoppingTime",
    "RepresentationError",
    "backward",
    "check_comparison",
    "check_one_step_monotonicity",
    "dot",
    "evaluate",
    "implied_weights",
    "one_step",
    "solve_bsde",
]
