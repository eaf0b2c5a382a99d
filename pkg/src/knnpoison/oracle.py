"""Independent brute-force baselines for small instances.

These are the ground truth the production search is tested against, so they
deliberately avoid the production code paths:

 * max-norm feasibility is re-implemented here with per-axis interval loops;
 * finite-p feasibility uses a different solver family (hinge least squares
   with margin continuation, many restarts, and dense box sampling), and its
   verdict is cross-checked against geometry.intersect_witness on every call.
   A disagreement raises CrossCheckError and is never silently resolved.

Everything enforces OracleLimits before starting an exponential enumeration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import CrossCheckError, InputError, LimitError
from .geometry import Ball, NormSpec, intersect_witness, strictness_eps
from .influence import LabeledBall, construct_irs, score, AttackDelta
from .knn import Dataset, distance_matrix


@dataclass(frozen=True)
class OracleLimits:
    max_irs: int = 14
    max_budget: int = 4
    max_vertices: int = 18


DEFAULT_LIMITS = OracleLimits()


# ---------------------------------------------------------------------------
# Feasibility, independently of module geometry
# ---------------------------------------------------------------------------

def _interval_feasible(centers, radii, eps):
    """Exact per-axis interval intersection for the max norm (own code path)."""
    n = len(radii)
    d = len(centers[0])
    mid = [0.0] * d
    for axis in range(d):
        lo = max(centers[i][axis] - radii[i] for i in range(n))
        hi = min(centers[i][axis] + radii[i] for i in range(n))
        if not hi - lo > 0.0:
            return None
        mid[axis] = (lo + hi) / 2.0
    residual = max(
        max(abs(mid[axis] - centers[i][axis]) for axis in range(d)) - radii[i]
        for i in range(n)
    )
    if residual <= -eps:
        return np.asarray(mid, dtype=float)
    return None


def _lp_dists(x, centers, p):
    diff = np.abs(centers - x)
    if p == 2.0:
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return np.sum(diff ** p, axis=1) ** (1.0 / p)


def _penalty_feasible(centers, radii, p, eps, rng, warm_starts=()):
    """Hinge least squares with margin continuation plus dense sampling."""
    centers = np.asarray(centers, dtype=float)
    radii = np.asarray(radii, dtype=float)
    n, d = centers.shape
    min_r = float(radii.min())

    # two balls can hold no point deeper than half their overlap
    for i in range(n - 1):
        gaps = (_lp_dists(centers[i], centers[i + 1 :], p) - radii[i + 1 :] - radii[i]) / 2.0
        if float(gaps.max()) > -eps:
            return None

    box_lo = (centers - radii[:, None]).min(axis=0)
    box_hi = (centers + radii[:, None]).max(axis=0)
    n_samples = max(48, 12 * d)
    samples = rng.uniform(box_lo, box_hi, size=(n_samples, d))
    sample_res = np.array([float((_lp_dists(s, centers, p) - radii).max()) for s in samples])
    sample_order = np.argsort(sample_res, kind="stable")
    hit = int(sample_order[0])
    if sample_res[hit] <= -eps:
        return samples[hit]

    inits = [centers.mean(axis=0)]
    inits.extend(np.asarray(w, dtype=float) for w in warm_starts)
    inits.append(samples[sample_order[0]])

    margins = [m for m in (0.25 * min_r, 0.02 * min_r, 1e-3 * min_r, 100.0 * eps) if m >= eps]
    margins.append(eps)
    for margin in margins:
        shrunk = radii - margin
        if shrunk.min() <= 0.0:
            continue

        def hinge(x, shrunk=shrunk):
            return np.maximum(0.0, _lp_dists(x, centers, p) - shrunk)

        for x0 in inits:
            sol = least_squares(hinge, x0, method="trf", max_nfev=80)
            res = float((_lp_dists(sol.x, centers, p) - radii).max())
            if res <= -eps:
                return sol.x
    return None


def _feasible(centers, radii, norm: NormSpec, seed: int, warm_starts=()):
    """Independent verdict, cross-checked against module geometry for finite p.

    Returns the witness point or None.
    """
    eps = strictness_eps(radii)
    if norm.is_inf:
        return _interval_feasible([list(c) for c in centers], list(radii), eps)
    rng = np.random.default_rng(seed)
    mine = _penalty_feasible(centers, radii, norm.p, eps, rng, warm_starts)
    balls = [Ball(c, float(r)) for c, r in zip(centers, radii)]
    other = intersect_witness(balls, norm, seed=seed + 1, extra_inits=warm_starts)
    if (mine is not None) != other.is_witness:
        raise CrossCheckError(
            "feasibility routines disagree: penalty-LS says "
            f"{'witness' if mine is not None else 'empty'}, subgradient says "
            f"{'witness' if other.is_witness else 'empty'} "
            f"(n={len(radii)}, p={norm.p}, eps={eps:g})"
        )
    if mine is None:
        return None
    mine_res = float((_lp_dists(mine, centers, norm.p) - radii).max())
    if other.is_witness and other.residual < mine_res:
        return other.point
    return mine


# ---------------------------------------------------------------------------
# Grouping: identical balls collapse, weights add
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _Group:
    center: np.ndarray
    radius: float
    weight: int


def _group_regions(irs: list[LabeledBall], multiplicity: int) -> list[_Group]:
    table: dict[tuple, list] = {}
    for b in irs:
        if b.ball.radius <= 0.0:
            continue
        gated = b.value if b.cost <= multiplicity else 0
        key = b.ball.key()
        if key not in table:
            table[key] = [b.ball.center, b.ball.radius, 0]
        table[key][2] += gated
    groups = [
        _Group(center=v[0], radius=v[1], weight=v[2])
        for v in table.values()
        if v[2] > 0
    ]
    groups.sort(key=lambda g: (-g.weight, g.center.tobytes(), g.radius))
    return groups


def brute_single(
    irs: list[LabeledBall],
    multiplicity: int,
    norm: NormSpec,
    limits: OracleLimits = DEFAULT_LIMITS,
    seed: int = 0,
):
    """Optimal single-point total score increase by exhaustive subset search.

    Enumerates subsets of distinct regions in descending total-value order
    with branch-and-bound; a subset counts only if the regions share a strict
    interior point.  Returns (best_tsi, witness or None).
    """
    if multiplicity < 1:
        raise InputError("multiplicity must be >= 1")
    groups = _group_regions(irs, multiplicity)
    if len(groups) > limits.max_irs:
        raise LimitError(
            f"{len(groups)} distinct regions exceed the oracle limit {limits.max_irs}"
        )
    if not groups:
        return 0, None

    weights = [g.weight for g in groups]
    suffix = [0] * (len(groups) + 1)
    for i in range(len(groups) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + weights[i]

    best = {"w": 0, "x": None}

    def dfs(idx, chosen_centers, chosen_radii, weight, witness):
        if weight > best["w"]:
            best["w"] = weight
            best["x"] = witness
        if idx == len(groups) or weight + suffix[idx] <= best["w"]:
            return
        g = groups[idx]
        centers = chosen_centers + [g.center]
        radii = chosen_radii + [g.radius]
        if len(radii) == 1:
            dfs(idx + 1, centers, radii, weight + g.weight, g.center.copy())
        else:
            warm = (witness,) if witness is not None else ()
            pt = _feasible(centers, radii, norm, seed=seed, warm_starts=warm)
            if pt is not None:
                dfs(idx + 1, centers, radii, weight + g.weight, pt)
        dfs(idx + 1, chosen_centers, chosen_radii, weight, witness)

    dfs(0, [], [], 0, None)
    return best["w"], best["x"]


# ---------------------------------------------------------------------------
# Optimal b-point attack
# ---------------------------------------------------------------------------

def _collect_candidates(groups, norm, seed):
    """Witnesses of all feasible region subsets, deduplicated by coverage
    pattern and filtered to maximal patterns."""
    centers = np.stack([g.center for g in groups])
    radii = np.array([g.radius for g in groups])
    patterns: dict[frozenset, np.ndarray] = {}

    def record(point):
        dists = _lp_dists(point, centers, norm.p) if not norm.is_inf else np.abs(
            centers - point
        ).max(axis=1)
        pat = frozenset(int(i) for i in np.nonzero(dists < radii)[0])
        if pat and pat not in patterns:
            patterns[pat] = np.asarray(point, dtype=float)

    def dfs(idx, chosen_centers, chosen_radii, witness):
        if idx == len(groups):
            return
        g = groups[idx]
        cs = chosen_centers + [g.center]
        rs = chosen_radii + [g.radius]
        if len(rs) == 1:
            record(g.center)
            dfs(idx + 1, cs, rs, g.center.copy())
        else:
            warm = (witness,) if witness is not None else ()
            pt = _feasible(cs, rs, norm, seed=seed, warm_starts=warm)
            if pt is not None:
                record(pt)
                dfs(idx + 1, cs, rs, pt)
        dfs(idx + 1, chosen_centers, chosen_radii, witness)

    dfs(0, [], [], None)

    keys = sorted(patterns, key=lambda p: (len(p), sorted(p)))
    maximal = [p for p in keys if not any(p < q for q in keys)]
    return [patterns[p] for p in sorted(maximal, key=sorted)]


class _AttackScorer:
    """Reclassification scorer specialized for repeated candidate evaluation.

    Matches knn.classify exactly: slots ordered by (distance, insertion
    index); inserted points rank after every training point at equal
    distance, and among themselves by insertion order.
    """

    def __init__(self, train: Dataset, targets: Dataset, cand_points, k: int, norm: NormSpec):
        self.k = k
        self.labels = targets.labels
        self.mults = [int(m) for m in targets.multiplicities]
        dmat = distance_matrix(targets.features, train.features, norm)
        self.train_slots = []
        for t in range(targets.n):
            order = np.argsort(dmat[t], kind="stable")
            self.train_slots.append(
                [(float(dmat[t, i]), train.labels[i], int(train.multiplicities[i])) for i in order]
            )
        if len(cand_points):
            self.cand_dists = distance_matrix(targets.features, np.stack(cand_points), norm)
        else:
            self.cand_dists = np.zeros((targets.n, 0))

    def score(self, chosen, y_plus: str) -> int:
        """chosen: list of (candidate index, multiplicity), in insertion order."""
        k = self.k
        total = 0
        for t in range(len(self.labels)):
            ins = [(float(self.cand_dists[t, ci]), pos, m) for pos, (ci, m) in enumerate(chosen)]
            ins.sort(key=lambda e: (e[0], e[1]))
            votes: dict[str, int] = {}
            remaining = k
            ti = ii = 0
            slots = self.train_slots[t]
            while remaining > 0:
                use_train = ii >= len(ins) or (ti < len(slots) and slots[ti][0] <= ins[ii][0])
                if use_train:
                    dist, lbl, m = slots[ti]
                    ti += 1
                else:
                    dist, _, m = ins[ii]
                    lbl = y_plus
                    ii += 1
                take = min(remaining, m)
                votes[lbl] = votes.get(lbl, 0) + take
                remaining -= take
            best = max(votes.values())
            winner = min(lbl for lbl, v in votes.items() if v == best)
            if winner == self.labels[t]:
                total += self.mults[t]
        return total


def brute_attack(
    train: Dataset,
    targets: Dataset,
    k: int,
    budget: int,
    norm: NormSpec,
    limits: OracleLimits = DEFAULT_LIMITS,
    seed: int = 0,
    extra_candidates=(),
) -> int:
    """Maximum reclassification score over every way to spend the budget.

    Candidate locations are the witnesses of feasible region subsets, which
    suffice because the effect of an insertion depends only on which regions
    contain it; multiplicity splits are enumerated exhaustively.
    extra_candidates adds arbitrary insertion locations to the pool (a test
    hook for validating candidate sufficiency; it can only raise the result).
    """
    if budget < 0:
        raise InputError("budget must be >= 0")
    if budget > limits.max_budget:
        raise LimitError(f"budget {budget} exceeds the oracle limit {limits.max_budget}")
    base = score(AttackDelta(), targets, train, k, norm)
    if budget == 0:
        return base

    labels = set(targets.labels)
    if len(labels) != 1:
        raise InputError("brute_attack needs a homogeneous target pool")
    y_plus = next(iter(labels))

    irs = construct_irs(train, targets, y_plus, k, norm)
    groups = _group_regions(irs, multiplicity=max(1, -(-k // 2)))
    if len(groups) > limits.max_irs:
        raise LimitError(
            f"{len(groups)} distinct regions exceed the oracle limit {limits.max_irs}"
        )
    if not groups:
        return base

    candidates = _collect_candidates(groups, norm, seed)
    candidates.extend(np.asarray(p, dtype=float) for p in extra_candidates)
    scorer = _AttackScorer(train, targets, candidates, k, norm)

    best = base
    for size in range(1, budget + 1):
        for combo in itertools.combinations_with_replacement(range(len(candidates)), size):
            chosen = [(ci, n) for ci, n in _run_lengths(combo)]
            best = max(best, scorer.score(chosen, y_plus))
    return best


def _run_lengths(sorted_indices):
    out = []
    for ci in sorted_indices:
        if out and out[-1][0] == ci:
            out[-1][1] += 1
        else:
            out.append([ci, 1])
    return [(ci, n) for ci, n in out]


# ---------------------------------------------------------------------------
# Maximum independent set
# ---------------------------------------------------------------------------

def brute_mis(adjacency, limits: OracleLimits = DEFAULT_LIMITS) -> int:
    """Exact maximum-independent-set size by subset search with pruning.

    adjacency maps each vertex to its neighbors (dict or sequence); isolated
    vertices appear as keys with empty neighbor lists.
    """
    if isinstance(adjacency, dict):
        items = adjacency.items()
    else:
        items = enumerate(adjacency)
    vertices: set = set()
    edges: set[tuple] = set()
    for v, nbrs in items:
        vertices.add(v)
        for u in nbrs:
            vertices.add(u)
            edges.add((v, u) if repr(v) <= repr(u) else (u, v))
    order = sorted(vertices, key=repr)
    n = len(order)
    if n > limits.max_vertices:
        raise LimitError(f"{n} vertices exceed the oracle limit {limits.max_vertices}")
    if n == 0:
        return 0
    index = {v: i for i, v in enumerate(order)}
    nbr_mask = [0] * n
    for a, b in edges:
        if a == b:
            continue
        nbr_mask[index[a]] |= 1 << index[b]
        nbr_mask[index[b]] |= 1 << index[a]

    best = 0

    def dfs(mask: int, size: int) -> None:
        nonlocal best
        if size > best:
            best = size
        if mask == 0 or size + bin(mask).count("1") <= best:
            return
        v = (mask & -mask).bit_length() - 1
        dfs(mask & ~(nbr_mask[v] | (1 << v)), size + 1)
        dfs(mask & ~(1 << v), size)

    dfs((1 << n) - 1, 0)
    return best
