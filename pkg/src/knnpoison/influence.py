"""Influencing regions, attacker score, and total score increase.

An influencing region for a target is the ball of insertion locations from
which an added attack-labeled point (with enough multiplicity) flips that
target's prediction.  Each region carries

  value: +1 when flipping the target raises the attacker's score, else 0
         (-1 appears only in the generalized mixed-pool weighting),
  cost:  the minimum multiplicity of one inserted point that forces the flip,
         never more than ceil(k/2).

The score function is the ground truth: it reclassifies every target against
the augmented training set and never consults region geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .geometry import Ball, NormSpec, distances_to_many
from .knn import Dataset, LabeledPoint, _winner, classify, classify_many, knn_neighbors


@dataclass(frozen=True, eq=False)
class LabeledBall:
    ball: Ball
    value: int
    cost: int
    target_index: int

    def __post_init__(self) -> None:
        if self.cost < 0:
            raise InputError("cost must be >= 0")


@dataclass(frozen=True, eq=False)
class Insertion:
    point: np.ndarray
    label: str
    multiplicity: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        if self.multiplicity < 1:
            raise InputError("insertion multiplicity must be >= 1")

    def as_tuple(self):
        return (self.point, self.label, self.multiplicity)


@dataclass(frozen=True)
class AttackDelta:
    """Ordered multiset of training-set insertions."""

    insertions: tuple[Insertion, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "insertions", tuple(self.insertions))

    @property
    def total_multiplicity(self) -> int:
        return sum(ins.multiplicity for ins in self.insertions)

    def __len__(self) -> int:
        return len(self.insertions)


def construct_irs(
    train: Dataset,
    targets: Dataset,
    y_plus: str,
    k: int,
    norm: NormSpec,
) -> list[LabeledBall]:
    """One influencing region per unit of target multiplicity.

    A target entry of multiplicity m contributes m identical regions (its
    copies flip together and each flip is worth one score unit); target_index
    is the entry's position in the target dataset either way.  Targets already
    predicted y_plus get a zero-radius, zero-value, zero-cost placeholder.
    """
    out: list[LabeledBall] = []
    for t in range(targets.n):
        x = targets.features[t]
        mult = int(targets.multiplicities[t])
        pred = classify(x, train, k, norm)
        if pred == y_plus:
            region = LabeledBall(Ball(x.copy(), 0.0), value=0, cost=0, target_index=t)
        else:
            slots = knn_neighbors(x, train, k, norm)
            labels = [lbl for _, _, lbl in slots]
            j = k - 1
            while _plurality_of(labels) != y_plus:
                labels[j] = y_plus
                j -= 1
            nearest_relabeled = j + 1
            radius = slots[nearest_relabeled][1]
            cost = k - 1 - j
            region = LabeledBall(Ball(x.copy(), radius), value=1, cost=cost, target_index=t)
        out.extend([region] * mult)
    return out


def _plurality_of(labels) -> str:
    votes: dict[str, int] = {}
    for lbl in labels:
        votes[lbl] = votes.get(lbl, 0) + 1
    return _winner(votes)


def score(delta: AttackDelta, targets: Dataset, train: Dataset, k: int, norm: NormSpec) -> int:
    """Number of targets (with multiplicity) the learner labels as they wish.

    Ground-truth evaluator: computed by reclassifying against train + delta.
    """
    augmented = train.with_insertions(ins.as_tuple() for ins in delta.insertions)
    preds = classify_many(targets.features, augmented, k, norm)
    return int(
        sum(
            int(targets.multiplicities[i])
            for i, pred in enumerate(preds)
            if pred == targets.labels[i]
        )
    )


def tsi(point, y_plus: str, multiplicity: int, irs: list[LabeledBall], norm: NormSpec) -> int:
    """Score increase of inserting (point, y_plus) with the given multiplicity.

    Sums region values over regions that strictly contain the point and whose
    cost the multiplicity meets.
    """
    if multiplicity < 1:
        raise InputError("multiplicity must be >= 1")
    if not irs:
        return 0
    centers = np.stack([b.ball.center for b in irs])
    radii = np.array([b.ball.radius for b in irs])
    values = np.array([b.value for b in irs])
    costs = np.array([b.cost for b in irs])
    dists = distances_to_many(point, centers, norm)
    hit = (dists < radii) & (costs <= multiplicity)
    return int(values[hit].sum())


def weight(target: LabeledPoint, y_plus: str, train: Dataset, k: int, norm: NormSpec) -> int:
    """Per-target contribution sign in the generalized mixed-pool coverage.

    +1: the target wants y_plus and is currently denied it.
    -1: the target wants another label and currently has it (a flip hurts).
     0: otherwise.
    """
    pred = classify(target.features, train, k, norm)
    if target.label == y_plus and pred != y_plus:
        return 1
    if target.label != y_plus and pred == target.label:
        return -1
    return 0
