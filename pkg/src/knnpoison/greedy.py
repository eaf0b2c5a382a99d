"""Greedy budgeted attack built from repeated one-point searches.

Each round rebuilds the influencing regions against the already-poisoned
training set, asks the one-point search for its best insertion given the
remaining budget, inserts it with the multiplicity the search reported, and
repeats until the budget is spent or no insertion helps.

When every inner search ran to completion the attack's total score increase
is at least a (1 - 1/e) / ceil(k/2) fraction of the optimal budgeted attack
(generalized to (1 - e^-beta) / ceil(k/2) for a beta-approximate inner
search), and verify_bound checks that inequality exactly over rationals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ContractError, InputError
from .geometry import NormSpec
from .influence import AttackDelta, Insertion, construct_irs, score
from .knn import Dataset
from .search import SearchBudget, SearchOutcome, choppa


@dataclass(frozen=True)
class GreedyConfig:
    budget: int
    total_time: float | None
    k: int
    norm: NormSpec
    y_plus: str
    seed: int = 0
    beta: float = 1.0

    def __post_init__(self) -> None:
        if self.budget < 0:
            raise InputError("budget must be >= 0")
        if self.k < 1:
            raise InputError("k must be >= 1")
        if not 0.0 < self.beta <= 1.0:
            raise InputError("beta must lie in (0, 1]")

    @property
    def k_prime(self) -> int:
        return math.ceil(self.k / 2)


@dataclass(frozen=True, eq=False)
class AttackReport:
    delta: AttackDelta
    score_before: int
    score_after: int
    tsi_total: int
    calls: tuple[SearchOutcome, ...]
    bound_factor: float | None
    config: GreedyConfig


def git2achoppa(train: Dataset, targets: Dataset, cfg: GreedyConfig) -> AttackReport:
    """Greedy budgeted insertion attack.

    The time budget is split evenly across the planned calls; the inner
    multiplicity cap is min(remaining budget, ceil(k/2)).  Stops early when
    the search finds no positive-score insertion.
    """
    score_before = score(AttackDelta(), targets, train, cfg.k, cfg.norm)
    insertions: list[Insertion] = []
    calls: list[SearchOutcome] = []
    remaining = cfg.budget
    per_call = None if cfg.total_time is None else cfg.total_time / max(cfg.budget, 1)

    while remaining > 0:
        augmented = train.with_insertions(ins.as_tuple() for ins in insertions)
        irs = construct_irs(augmented, targets, cfg.y_plus, cfg.k, cfg.norm)
        active = [b for b in irs if b.ball.radius > 0.0]
        outcome = choppa(
            active,
            SearchBudget(
                wall_time=per_call,
                max_multiplicity=min(remaining, cfg.k_prime),
            ),
            cfg.norm,
            seed=cfg.seed + len(calls),
        )
        calls.append(outcome)
        if outcome.best_point is None or outcome.best_tsi <= 0:
            break
        insertions.append(Insertion(outcome.best_point, cfg.y_plus, outcome.best_multiplicity))
        remaining -= outcome.best_multiplicity

    delta = AttackDelta(tuple(insertions))
    score_after = score(delta, targets, train, cfg.k, cfg.norm)
    tsi_total = sum(c.best_tsi for c in calls if c.best_tsi > 0)
    bound_factor = None
    if all(c.completed for c in calls):
        bound_factor = (1.0 - math.exp(-cfg.beta)) / cfg.k_prime
    return AttackReport(
        delta=delta,
        score_before=score_before,
        score_after=score_after,
        tsi_total=tsi_total,
        calls=tuple(calls),
        bound_factor=bound_factor,
        config=cfg,
    )


def verify_bound(report: AttackReport, opt_tsi: int) -> bool:
    """Exact check of tsi_total >= (1 - e^-beta) / ceil(k/2) * opt_tsi.

    Compared over rationals: e^-beta is bracketed by alternating partial sums
    of its power series, refined until the inequality is decided, so no float
    rounding can flip the verdict.
    """
    if report.bound_factor is None:
        raise ContractError("bound_factor absent: some search call did not complete")
    if opt_tsi < 0:
        raise InputError("opt_tsi must be >= 0")
    k_prime = report.config.k_prime
    beta = Fraction(report.config.beta)
    lhs = Fraction(report.tsi_total) * k_prime

    terms = 40
    while True:
        lo, hi = _exp_neg_bounds(beta, terms)
        rhs_hi = (1 - lo) * opt_tsi   # upper bound on (1 - e^-beta) * opt
        rhs_lo = (1 - hi) * opt_tsi   # lower bound
        if lhs >= rhs_hi:
            return True
        if lhs < rhs_lo:
            return False
        terms *= 2
        if terms > 10_000:
            raise ContractError("could not separate bound comparison (degenerate beta?)")


def _exp_neg_bounds(beta: Fraction, terms: int) -> tuple[Fraction, Fraction]:
    """Rational bracket of e^-beta via alternating series partial sums."""
    n_min = max(terms, 2 * (int(beta) + 2))
    partial = Fraction(0)
    term = Fraction(1)
    sums = []
    for j in range(n_min + 2):
        partial += term
        sums.append(partial)
        term = term * (-beta) / (j + 1)
    # once term magnitudes decrease, consecutive partial sums bracket the limit
    s1, s2 = sums[-2], sums[-1]
    return (min(s1, s2), max(s1, s2))
