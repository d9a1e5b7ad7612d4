"""Reflected BSDEs with a lower (issuer) or upper (holder) obstacle.

At each node the unreflected candidate is obtained from the children with the
ordinary one-step solve and then pushed onto the admissible side of the
obstacle. The push ``dK[n]`` acts on the step that leaves ``n``: the cumulative
reflection at a node is the sum of ``dK`` over its strict ancestors, so
``K_tau = 0`` means no reflection happened strictly before ``tau``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .evaluation import PICARD_TOL, one_step
from .generators import CashFlowProcess, Generator, check_stability
from .lattice import EventTree, StoppingTime, cumulative, first_hitting

LOWER = "lower"
UPPER = "upper"


@dataclass(frozen=True)
class RbsdeSolution:
    Y: list
    Z: list
    K_increments: list
    side: str
    obstacle: list
    candidate: list
    tree: EventTree = field(default=None, repr=False, compare=False)

    @property
    def Y0(self):
        return self.Y[0]

    def cumulative_K(self) -> list:
        return cumulative(self.tree, self.K_increments)

    def contact(self, tol=0) -> list:
        return [abs(y - x) <= tol for y, x in zip(self.Y, self.obstacle)]

    def rows(self) -> list:
        """Per-node dump: id, k, S, Y, Z, dK, obstacle, contact."""
        tree = self.tree
        contact = self.contact()
        return [
            {
                "node": v,
                "k": tree.level[v],
                "S": tree.prices[v] if tree.dim > 1 else tree.spot(v),
                "Y": self.Y[v],
                "Z": self.Z[v],
                "dK": self.K_increments[v],
                "obstacle": self.obstacle[v],
                "contact": contact[v],
            }
            for v in range(tree.n_nodes)
        ]


def _solve(tree: EventTree, gen: Generator, flows: CashFlowProcess, obstacle: Sequence,
           side: str, tol: float) -> RbsdeSolution:
    check_stability(tree, gen)
    n = tree.n_nodes
    if len(obstacle) != n:
        raise ValueError("obstacle must be defined on every node")
    Y = [None] * n
    Z = [None] * n
    dK = [0] * n
    cand = [None] * n
    for v in tree.leaves:
        Y[v] = cand[v] = obstacle[v]
    for v in reversed(tree.internal):
        y, Z[v] = one_step(tree, gen, v, [Y[c] for c in tree.children[v]], flows[v], tol)
        cand[v] = y
        if side == LOWER:
            Y[v] = y if y >= obstacle[v] else obstacle[v]
            dK[v] = Y[v] - y
        else:
            Y[v] = y if y <= obstacle[v] else obstacle[v]
            dK[v] = y - Y[v]
    return RbsdeSolution(Y, Z, dK, side, list(obstacle), cand, tree)


def solve_reflected_lower(tree: EventTree, gen: Generator, flows: CashFlowProcess,
                          obstacle: Sequence, tol: float = PICARD_TOL) -> RbsdeSolution:
    """Smallest g-supermartingale-type solution staying above ``obstacle``."""
    return _solve(tree, gen, flows, obstacle, LOWER, tol)


def solve_reflected_upper(tree: EventTree, gen: Generator, flows: CashFlowProcess,
                          obstacle: Sequence, tol: float = PICARD_TOL) -> RbsdeSolution:
    """Mirror of :func:`solve_reflected_lower`; pass ``-A`` as flows for the holder."""
    return _solve(tree, gen, flows, obstacle, UPPER, tol)


def first_contact_time(sol: RbsdeSolution, tol=0) -> StoppingTime:
    """Per path, the first node where the solution touches its obstacle."""
    return first_hitting(sol.tree, sol.contact(tol))


class LatestExercise(NamedTuple):
    time: StoppingTime
    caveat: bool
    rational_latest: StoppingTime


def latest_exercise_time(sol: RbsdeSolution, tol=0) -> LatestExercise:
    """First time the cumulative reflection is positive (maturity if never).

    In discrete time every reflection is a point mass, so whenever the returned
    time is not maturity the reflection is already positive there; ``caveat``
    flags this. ``rational_latest`` stops at the node where the reflection is
    applied, which is the latest time with zero cumulative reflection.
    """
    tree = sol.tree
    k_cum = sol.cumulative_K()
    positive = [k > tol for k in k_cum]
    tau_bar = first_hitting(tree, positive)
    caveat = any(positive[v] for v in tau_bar)
    pushing = [dk > tol for dk in sol.K_increments]
    return LatestExercise(tau_bar, caveat, first_hitting(tree, pushing))
