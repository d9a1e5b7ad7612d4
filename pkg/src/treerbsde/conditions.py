"""Arbitrage, superhedging and break-even predicates on a finite tree.

Every node of a tree has positive probability, so "with positive probability"
reduces to "at some node of the stop set".

The predicates work on a *gap* process: for the issuer
``V(x1 + p, phi, A) + X^h - V0(x1)`` and for the holder
``V(x2 - p, psi, -A) - X^h - V0(x2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .lattice import EventTree, StoppingTime

ISSUER_KINDS = ("AO", "SH", "BG", "BE", "NA")
HOLDER_KINDS = ("AO'", "SH'", "BL'", "BE'", "NA'")


@dataclass(frozen=True)
class ConditionKind:
    name: str
    eps: object = None

    def __post_init__(self):
        if self.name not in ISSUER_KINDS + HOLDER_KINDS:
            raise ValueError(f"unknown condition {self.name!r}")
        if self.name in ("BG", "BL'") and (self.eps is None or not self.eps > 0):
            raise ValueError(f"{self.name} needs eps > 0")

    @property
    def holder(self) -> bool:
        return self.name.endswith("'")

    @property
    def base(self) -> str:
        return self.name.rstrip("'")


def issuer_gap(wealth: Sequence, payoff: Sequence, benchmark: Sequence) -> list:
    return [v + h - b for v, h, b in zip(wealth, payoff, benchmark)]


def holder_gap(wealth: Sequence, payoff: Sequence, benchmark: Sequence) -> list:
    return [v - h - b for v, h, b in zip(wealth, payoff, benchmark)]


def at_stop(kind: ConditionKind, gap: Sequence, nodes: Iterable[int], tol=0) -> bool:
    """Literal evaluation of a condition for one stopping time."""
    vals = [gap[v] for v in nodes]
    base = kind.base
    if base == "AO":
        return all(g >= -tol for g in vals) and any(g > tol for g in vals)
    if base == "SH":
        return all(g >= -tol for g in vals)
    if base == "BG":
        return all(g <= kind.eps + tol for g in vals)
    if base == "BL":
        return all(g >= -kind.eps - tol for g in vals)
    if base == "BE":
        return all(abs(g) <= tol for g in vals)
    if base == "NA":
        return all(abs(g) <= tol for g in vals) or any(g < -tol for g in vals)
    raise AssertionError(base)


def exists_cover(tree: EventTree, ok: Sequence[bool]) -> bool:
    """Is there a stopping time all of whose nodes are flagged ``ok``?"""
    reach = [False] * tree.n_nodes
    for v in reversed(range(tree.n_nodes)):
        kids = tree.children[v]
        reach[v] = ok[v] or (bool(kids) and all(reach[c] for c in kids))
    return reach[0]


def best_cover(tree: EventTree, weak: Sequence[bool], strict: Sequence[bool]) -> int:
    """0: no stopping time has all nodes ``weak``; 1: some does; 2: some also hits ``strict``."""
    best = [0] * tree.n_nodes
    for v in reversed(range(tree.n_nodes)):
        here = 2 if strict[v] else (1 if weak[v] else 0)
        kids = tree.children[v]
        if kids and all(best[c] > 0 for c in kids):
            cont = 2 if any(best[c] == 2 for c in kids) else 1
            here = max(here, cont)
        best[v] = here
    return best[0]


def na_exists(tree: EventTree, gap: Sequence, tol=0) -> bool:
    """Is there a stopping time at which (NA) holds for this gap process?"""
    return any(g < -tol for g in gap) or exists_cover(tree, [abs(g) <= tol for g in gap])


def for_pair(kind: ConditionKind, tree: EventTree, gap: Sequence, tol=0) -> bool:
    """Condition for a strategy without a fixed stopping time.

    Issuer (SH) and (AO) are required for every stopping time; all other
    conditions, and every holder condition, ask for some stopping time.
    """
    base = kind.base
    weak = [g >= -tol for g in gap]
    if not kind.holder and base == "SH":
        return all(weak)
    if not kind.holder and base == "AO":
        # fails for some tau iff a shortfall exists or some tau breaks even exactly
        return all(weak) and not exists_cover(tree, [abs(g) <= tol for g in gap])
    if base == "SH":
        return exists_cover(tree, weak)
    if base == "AO":
        return best_cover(tree, weak, [g > tol for g in gap]) == 2
    if base == "NA":
        return na_exists(tree, gap, tol)
    if base == "BE":
        return exists_cover(tree, [abs(g) <= tol for g in gap])
    if base == "BG":
        return exists_cover(tree, [g <= kind.eps + tol for g in gap])
    if base == "BL":
        return exists_cover(tree, [g >= -kind.eps - tol for g in gap])
    raise AssertionError(base)


def evaluate_condition(kind: ConditionKind, tree: EventTree, gap: Sequence,
                       tau: StoppingTime | None, tol=0) -> bool:
    if tau is not None:
        return at_stop(kind, gap, tau.stop_set, tol)
    return for_pair(kind, tree, gap, tol)
