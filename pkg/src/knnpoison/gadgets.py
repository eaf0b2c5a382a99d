"""Hardness-reduction constructors, used as executable test fixtures.

A graph G on n vertices maps to a family of balls in R^n: one ball per
vertex (center r*e_i, radius r) and one per edge (center -r*(e_i + e_j),
radius (2)^(1/p) * (r - epsilon)), the edge balls taken with multiplicity n.
Any vertex-vertex-edge triple intersects pairwise but never mutually, so the
size of the maximum mutual intersection is n*|E| plus the graph's maximum
independent set.

The same family arises as influencing regions of a concrete attack instance:
training points sit at twice the vertex-ball centers (and just short of twice
the edge-ball centers), all one class, with the ball centers as the target
pool of the other class.  realize_atkknn builds that instance; extend_k and
extend_b lift it to larger k and larger budgets without changing the regions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .geometry import Ball
from .knn import Dataset

TRAIN_LABEL = "neg"
TARGET_LABEL = "pos"


@dataclass(frozen=True)
class GadgetParams:
    n: int
    edges: tuple[tuple[int, int], ...]
    r: float = 9.0
    epsilon: float | None = None   # defaults to 1/n
    p: float = 2.0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InputError("gadget needs at least one vertex")
        if not self.r > 0:
            raise InputError("r must be positive")
        if self.epsilon is not None and not 0 < self.epsilon < self.r:
            raise InputError("epsilon must lie in (0, r)")
        if not (1.0 < self.p < float("inf")):
            raise InputError("the construction is defined for finite p > 1")
        normalized = []
        seen = set()
        for i, j in self.edges:
            if not (1 <= i <= self.n and 1 <= j <= self.n) or i == j:
                raise InputError(f"bad edge ({i}, {j}) for n={self.n}")
            e = (min(i, j), max(i, j))
            if e in seen:
                continue
            seen.add(e)
            normalized.append(e)
        object.__setattr__(self, "edges", tuple(sorted(normalized)))

    @property
    def eps(self) -> float:
        return self.epsilon if self.epsilon is not None else 1.0 / self.n

    @property
    def edge_radius(self) -> float:
        return 2.0 ** (1.0 / self.p) * (self.r - self.eps)

    def basis(self, i: int) -> np.ndarray:
        e = np.zeros(self.n)
        e[i - 1] = 1.0
        return e


def phi(params: GadgetParams) -> list[Ball]:
    """The ball multiset for a graph: vertex balls once, edge balls n times."""
    out = [Ball(params.r * params.basis(i), params.r) for i in range(1, params.n + 1)]
    for i, j in params.edges:
        center = -params.r * (params.basis(i) + params.basis(j))
        out.extend(Ball(center, params.edge_radius) for _ in range(params.n))
    return out


def predicted_max_intersection(params: GadgetParams, mis: int) -> int:
    """n*|E| + MIS, the proven maximum mutual-intersection size."""
    return params.n * len(params.edges) + mis


def adjacency(params: GadgetParams) -> dict[int, list[int]]:
    adj: dict[int, list[int]] = {i: [] for i in range(1, params.n + 1)}
    for i, j in params.edges:
        adj[i].append(j)
        adj[j].append(i)
    return adj


def realize_atkknn(params: GadgetParams) -> tuple[Dataset, Dataset]:
    """Attack instance whose influencing regions reproduce phi(params) exactly.

    Training points all carry one label; the target pool (the ball centers,
    edge centers with multiplicity n) carries the label the attacker inserts.
    """
    r, eps = params.r, params.eps
    train_feats, train_mult = [], []
    for i in range(1, params.n + 1):
        train_feats.append(2.0 * r * params.basis(i))
        train_mult.append(1)
    for i, j in params.edges:
        train_feats.append(-(2.0 * r - eps) * (params.basis(i) + params.basis(j)))
        train_mult.append(1)
    train = Dataset(
        features=np.stack(train_feats),
        labels=(TRAIN_LABEL,) * len(train_feats),
        multiplicities=np.asarray(train_mult, dtype=np.int64),
    )

    target_feats, target_mult = [], []
    for i in range(1, params.n + 1):
        target_feats.append(r * params.basis(i))
        target_mult.append(1)
    for i, j in params.edges:
        target_feats.append(-r * (params.basis(i) + params.basis(j)))
        target_mult.append(params.n)
    targets = Dataset(
        features=np.stack(target_feats),
        labels=(TARGET_LABEL,) * len(target_feats),
        multiplicities=np.asarray(target_mult, dtype=np.int64),
    )
    return train, targets


def extend_k(train: Dataset, targets: Dataset, k: int) -> Dataset:
    """Pad the training set so the instance keeps its regions at odd k > 1.

    Each target location gains (k-1)/2 co-located points of each class, so a
    target's k-neighborhood is those plus its original nearest neighbor and
    one close insertion still flips it.  k = 1 is the identity.
    """
    if k % 2 == 0:
        raise InputError("extend_k requires odd k")
    if k == 1:
        return train
    copies = (k - 1) // 2
    insertions = []
    for t in range(targets.n):
        x = targets.features[t]
        insertions.append((x.copy(), TARGET_LABEL, copies))
        insertions.append((x.copy(), TRAIN_LABEL, copies))
    return train.with_insertions(insertions)


def extend_b(
    train: Dataset,
    targets: Dataset,
    b: int,
    step: float | None = None,
) -> tuple[Dataset, Dataset]:
    """b far-apart translated copies of the instance along the first axis.

    The optimal budget-b attack on the result scores b times the budget-1
    optimum of one copy.  The step defaults to 6r (with r recovered from the
    training coordinates), which keeps every cross-copy ball pair disjoint
    and every target's nearest neighbor inside its own copy.
    """
    if b < 1:
        raise InputError("b must be >= 1")
    if b == 1:
        return train, targets
    if step is None:
        step = 3.0 * float(np.abs(train.features).max())
    offsets = [i * step for i in range(b)]

    def shifted(ds: Dataset) -> Dataset:
        blocks = []
        for off in offsets:
            block = ds.features.copy()
            block[:, 0] += off
            blocks.append(block)
        return Dataset(
            features=np.vstack(blocks),
            labels=ds.labels * b,
            multiplicities=np.tile(ds.multiplicities, b),
        )

    return shifted(train), shifted(targets)


def read_edge_list(path, n_override: int | None = None) -> GadgetParams:
    """Parse a one-'i j'-pair-per-line edge file into gadget parameters."""
    edges = []
    max_vertex = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            if len(tokens) == 1:
                try:
                    max_vertex = max(max_vertex, int(tokens[0]))
                except ValueError:
                    raise InputError(f"{path}:{lineno}: bad vertex {tokens[0]!r}") from None
                continue
            try:
                i, j = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise InputError(f"{path}:{lineno}: bad edge {line.strip()!r}") from None
            edges.append((i, j))
            max_vertex = max(max_vertex, i, j)
    n = n_override if n_override is not None else max_vertex
    if n < 1:
        raise InputError(f"{path}: no vertices found")
    return GadgetParams(n=n, edges=tuple(edges))
