"""Anytime level-wise search for the best one-point insertion.

The influencing regions form a hypergraph: a hyperedge is a set of regions
with a common strict-interior point.  Candidate edges of size m are generated
from accepted (m-1)-edges, kept only if every (m-1)-subset was accepted, and
only then sent to the feasibility oracle.  The best witness by realized score
increase is tracked throughout, so interrupting the search always returns the
best insertion found so far.

When run without a wall clock the convexity shortcut is active: once a
candidate's size exceeds dimension + 1, acceptance of all its (m-1)-subsets
already implies feasibility, so the oracle is skipped and a witness for the
winning edge is materialized by a single feasibility call at selection time.
Under a finite clock witnesses are always materialized immediately, because a
truncated run must be able to report a concrete point.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .geometry import Ball, NormSpec, distances_to_many, intersect_witness
from .influence import LabeledBall


@dataclass(frozen=True, eq=False)
class Hyperedge:
    members: tuple[int, ...]          # sorted original region indices
    witness: np.ndarray | None        # None only for shortcut-accepted edges
    max_cost: int


@dataclass(frozen=True)
class SearchBudget:
    wall_time: float | None = None    # seconds; None means run to completion
    max_multiplicity: int = 1
    max_level: int | None = None
    max_stored_edges: int = 1_000_000

    def __post_init__(self) -> None:
        if self.wall_time is not None and not self.wall_time > 0:
            raise InputError("wall_time must be positive (or None for unlimited)")
        if self.max_multiplicity < 1:
            raise InputError("max_multiplicity must be >= 1")


@dataclass(frozen=True, eq=False)
class SearchOutcome:
    best_point: np.ndarray | None
    best_multiplicity: int
    best_tsi: int
    completed: bool
    levels_explored: int
    feasibility_calls: int


def required_multiplicity(edge: Hyperedge, irs: list[LabeledBall]) -> int:
    """Multiplicity reported with a winning edge: the max cost of its members."""
    return max(irs[i].cost for i in edge.members)


class _Evaluator:
    """Realized-score evaluation of a candidate point against the full region list."""

    def __init__(self, irs: list[LabeledBall], max_multiplicity: int, norm: NormSpec):
        self.norm = norm
        self.max_multiplicity = max_multiplicity
        self.centers = np.stack([b.ball.center for b in irs])
        self.radii = np.array([b.ball.radius for b in irs])
        self.values = np.array([b.value for b in irs])
        self.costs = np.array([b.cost for b in irs])

    def evaluate(self, point) -> tuple[int, int]:
        """Returns (tsi, multiplicity) where multiplicity is the smallest
        insertion count that realizes that tsi at this point."""
        dists = distances_to_many(point, self.centers, self.norm)
        inside = dists < self.radii
        gate = self.costs <= self.max_multiplicity
        counted = inside & gate & (self.values > 0)
        if not counted.any():
            # only zero or negative contributions available here
            penalty = int(self.values[inside & gate].sum())
            return min(penalty, 0), 1
        mult = int(self.costs[counted].max())
        tsi = int(self.values[inside & (self.costs <= mult)].sum())
        return tsi, max(mult, 1)


def choppa(
    irs: list[LabeledBall],
    budget: SearchBudget,
    norm: NormSpec,
    seed: int = 0,
    edge_observer=None,
    constraint_balls: tuple = (),
) -> SearchOutcome:
    """Level-wise hypergraph construction for the best single insertion.

    irs must already be filtered to positive radii.  The outcome's tsi is the
    realized score increase of inserting best_point with best_multiplicity;
    completed means the enumeration exhausted every level.  edge_observer, if
    given, receives every accepted Hyperedge (a test hook).

    constraint_balls restricts where the attacker may insert: every witness
    must lie strictly inside all of them, enforced by appending them to each
    feasibility query.  Any convex insertion domain expressible as balls
    plugs in here; the default is unconstrained.
    """
    if budget.max_multiplicity < 1:
        raise InputError("max_multiplicity must be >= 1")
    for b in irs:
        if b.ball.radius <= 0.0 and b.value != 0:
            raise InputError("choppa requires regions filtered to positive radius")

    ell = budget.max_multiplicity
    usable = [
        i
        for i, b in enumerate(irs)
        if b.ball.radius > 0.0 and b.value > 0 and b.cost <= ell
    ]
    if not usable:
        return SearchOutcome(None, 0, 0, True, 0, 0)

    # Identical regions collapse to one representative for enumeration; the
    # evaluator still sees every copy.
    reps: list[int] = []
    seen: dict[tuple, int] = {}
    for i in usable:
        key = irs[i].ball.key() + (irs[i].cost, irs[i].value)
        if key not in seen:
            seen[key] = i
            reps.append(i)

    evaluator = _Evaluator(irs, ell, norm)
    dim = irs[reps[0]].ball.dimension
    helly_active = budget.wall_time is None and all(b.value >= 0 for b in irs)
    deadline = None if budget.wall_time is None else time.monotonic() + budget.wall_time

    # rep weight: total gated value of the copies it stands for
    weight: dict[int, int] = {r: 0 for r in reps}
    for i in usable:
        key = irs[i].ball.key() + (irs[i].cost, irs[i].value)
        weight[seen[key]] += irs[i].value

    best = {"tsi": 0, "point": None, "mult": 0, "members": None}

    def consider(point, members) -> None:
        tsi, mult = evaluator.evaluate(point)
        if tsi > best["tsi"] or (
            tsi == best["tsi"] and best["members"] is not None and members < best["members"]
        ):
            best["tsi"] = tsi
            best["point"] = np.asarray(point, dtype=float).copy()
            best["mult"] = mult
            best["members"] = members

    feasibility_calls = 0
    stored_edges = 0
    levels_explored = 0
    completed = False
    # best shortcut-accepted edge, by summed member weight then lex order
    top_shortcut: tuple[int, tuple[int, ...]] | None = None

    constraints = list(constraint_balls)

    edges: dict[tuple[int, ...], Hyperedge] = {}
    for r in reps:
        e = (r,)
        if constraints:
            result = intersect_witness(
                [irs[r].ball] + constraints, norm, seed=seed
            )
            feasibility_calls += 1
            if not result.is_witness:
                continue
            witness = result.point
        else:
            witness = irs[r].ball.center.copy()
        edges[e] = Hyperedge(e, witness, irs[r].cost)
        consider(witness, e)
        if edge_observer is not None:
            edge_observer(edges[e])
    stored_edges += len(edges)
    levels_explored = 1 if edges or reps else 0

    def expired() -> bool:
        return deadline is not None and time.monotonic() >= deadline

    level = 1
    while True:
        if budget.max_level is not None and level >= budget.max_level:
            break
        prev = edges
        prev_keys = set(prev)
        new_edges: dict[tuple[int, ...], Hyperedge] = {}
        generated = False
        truncated = False
        level += 1
        for e, parent in prev.items():
            tail = e[-1]
            for r in reps:
                if r <= tail:
                    continue
                generated = True
                if expired():
                    truncated = True
                    break
                cand = e + (r,)
                if not _subsets_accepted(cand, prev_keys):
                    continue
                if helly_active and len(cand) - 1 >= dim + 1:
                    new_edges[cand] = Hyperedge(cand, None, 0)
                    if edge_observer is not None:
                        edge_observer(new_edges[cand])
                    msum = sum(weight[i] for i in cand)
                    if top_shortcut is None or (msum, _neg(cand)) > (
                        top_shortcut[0],
                        _neg(top_shortcut[1]),
                    ):
                        top_shortcut = (msum, cand)
                    continue
                balls = [irs[i].ball for i in cand] + constraints
                inits = [parent.witness] if parent.witness is not None else None
                result = intersect_witness(balls, norm, seed=seed, extra_inits=inits)
                feasibility_calls += 1
                if result.is_witness:
                    new_edges[cand] = Hyperedge(cand, result.point, _edge_cost(cand, irs))
                    consider(result.point, cand)
                    if edge_observer is not None:
                        edge_observer(new_edges[cand])
            if truncated:
                break
        if generated:
            levels_explored = level
        if truncated:
            break
        stored_edges += len(new_edges)
        if stored_edges > budget.max_stored_edges:
            break
        if not new_edges:
            completed = True
            break
        edges = new_edges

    if completed and top_shortcut is not None:
        msum, cand = top_shortcut
        wins_tie = best["members"] is None or cand < best["members"]
        if msum > best["tsi"] or (msum == best["tsi"] and wins_tie):
            balls = [irs[i].ball for i in cand] + constraints
            result = intersect_witness(balls, norm, seed=seed)
            feasibility_calls += 1
            if result.is_witness:
                consider(result.point, cand)

    return SearchOutcome(
        best_point=best["point"],
        best_multiplicity=best["mult"] if best["point"] is not None else 0,
        best_tsi=best["tsi"],
        completed=completed,
        levels_explored=levels_explored,
        feasibility_calls=feasibility_calls,
    )


def _neg(members: tuple[int, ...]):
    # larger-is-better companion for lexicographically-smallest tie breaking
    return tuple(-i for i in members)


def _edge_cost(members, irs) -> int:
    return max(irs[i].cost for i in members)


def _subsets_accepted(cand: tuple[int, ...], prev_keys: set) -> bool:
    # the subset dropping the last element is the generating parent, present
    # by construction; check the rest
    for drop in range(len(cand) - 1):
        if cand[:drop] + cand[drop + 1 :] not in prev_keys:
            return False
    return True
