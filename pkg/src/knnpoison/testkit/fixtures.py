"""Instance generators and the named fixtures used across the suites."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..geometry import Ball
from ..influence import LabeledBall
from ..knn import Dataset

TRAIN_LABEL = "neg"
TARGET_LABEL = "pos"


@dataclass(frozen=True)
class InstanceGen:
    """Random attack instances small enough for the brute-force oracles.

    spread_range controls how clustered the target pool is relative to the
    training cloud, which in turn controls how often influencing regions
    overlap; the defaults are calibrated so well over 30% of instances have a
    feasible size-2 edge while disjoint instances still occur.
    """

    dim_range: tuple[int, int] = (1, 3)
    target_range: tuple[int, int] = (4, 12)
    train_range: tuple[int, int] = (3, 8)
    spread_range: tuple[float, float] = (0.35, 1.5)
    seed: int = 0


def gen_instance(gen: InstanceGen, index: int = 0) -> tuple[Dataset, Dataset]:
    """Deterministic instance number `index` from the generator's stream."""
    rng = np.random.default_rng(np.random.SeedSequence([gen.seed & 0x7FFFFFFF, index]))
    d = int(rng.integers(gen.dim_range[0], gen.dim_range[1] + 1))
    n_targets = int(rng.integers(gen.target_range[0], gen.target_range[1] + 1))
    n_train = int(rng.integers(gen.train_range[0], gen.train_range[1] + 1))
    spread = float(rng.uniform(*gen.spread_range))
    train = Dataset(rng.uniform(-1.0, 1.0, size=(n_train, d)), (TRAIN_LABEL,) * n_train)
    targets = Dataset(
        spread * rng.uniform(-1.0, 1.0, size=(n_targets, d)),
        (TARGET_LABEL,) * n_targets,
    )
    return train, targets


# ---------------------------------------------------------------------------
# Named fixtures
# ---------------------------------------------------------------------------

def fixture_1d_pair() -> tuple[Dataset, Dataset]:
    """Two decoys on a line, one target halfway: region = ball(4, 4), cost 1."""
    train = Dataset(np.array([[0.0], [10.0]]), (TRAIN_LABEL,) * 2)
    targets = Dataset(np.array([[4.0]]), (TARGET_LABEL,))
    return train, targets


def fixture_1d_three_targets() -> tuple[Dataset, Dataset]:
    """Three targets whose regions share the interval around x=4; one point
    flips all three."""
    train = Dataset(np.array([[0.0], [10.0]]), (TRAIN_LABEL,) * 2)
    targets = Dataset(np.array([[3.0], [4.0], [5.0]]), (TARGET_LABEL,) * 3)
    return train, targets


def fixture_k3_line() -> tuple[Dataset, Dataset]:
    """k=3 line instance: the target needs two relabeled neighbors, so its
    region has radius 2 and cost 2."""
    train = Dataset(np.array([[1.0], [2.0], [3.0], [100.0]]), (TRAIN_LABEL,) * 4)
    targets = Dataset(np.array([[0.0]]), (TARGET_LABEL,))
    return train, targets


def fixture_gadget_k2_disks() -> list[LabeledBall]:
    """The three distinct disks of the one-edge gadget: pairwise but never
    mutually intersecting."""
    r, eps = 9.0, 0.5
    edge_radius = 2.0 ** 0.5 * (r - eps)
    return [
        LabeledBall(Ball(np.array([r, 0.0]), r), 1, 1, 0),
        LabeledBall(Ball(np.array([0.0, r]), r), 1, 1, 1),
        LabeledBall(Ball(np.array([-r, -r]), edge_radius), 1, 1, 2),
    ]


def fixture_coverage_trap() -> tuple[Dataset, Dataset]:
    """Greedy trap: six targets on a line whose regions admit one point
    covering {2,3,4,5} and points covering {1,2,3} and {4,5,6}, but nothing
    larger.  Greedy with budget 2 takes the size-4 bait and finishes at 5;
    the optimum pairs the two size-3 groups for 6.

    Each target's region radius is pinned by a dedicated anchor directly
    above it; anchors are far enough from the other targets not to shrink
    their regions.
    """
    positions = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    radii = [1.3, 1.55, 1.55, 1.55, 1.55, 1.3]
    train = Dataset(
        np.array([[p, r] for p, r in zip(positions, radii)]),
        (TRAIN_LABEL,) * 6,
    )
    targets = Dataset(
        np.array([[p, 0.0] for p in positions]),
        (TARGET_LABEL,) * 6,
    )
    return train, targets


# ---------------------------------------------------------------------------
# Graph enumeration for the hardness-gadget suite
# ---------------------------------------------------------------------------

def all_graphs_up_to(max_n: int):
    """Every graph on 1..max_n vertices, one representative per isomorphism
    class, as (n, edge tuple) pairs with 1-based vertices."""
    out = []
    for n in range(1, max_n + 1):
        pairs = list(itertools.combinations(range(1, n + 1), 2))
        perms = [dict(zip(range(1, n + 1), q)) for q in itertools.permutations(range(1, n + 1))]
        seen = set()
        for mask in range(1 << len(pairs)):
            edges = frozenset(pairs[i] for i in range(len(pairs)) if mask >> i & 1)
            if edges:
                canon = min(
                    tuple(sorted((min(p[a], p[b]), max(p[a], p[b])) for a, b in edges))
                    for p in perms
                )
            else:
                canon = ()
            if canon not in seen:
                seen.add(canon)
                out.append((n, tuple(sorted(edges))))
    return out


def random_graph(n: int, edge_prob: float, rng) -> tuple[int, tuple]:
    edges = tuple(
        (i, j)
        for i in range(1, n + 1)
        for j in range(i + 1, n + 1)
        if rng.random() < edge_prob
    )
    return n, edges
