"""Desk-scale experiment harness: synthetic grids and the projection defense.

Synthetic instances follow the homogeneous scheme: every training point
carries the decoy label and every target the attack label, so all ten targets
start misclassified and a cell's score is the mean realized score of the best
one-point insertion.  The defense harness fits a principal-component model on
the training set, replays the budgeted attack in each reduced dimension, and
reports attacker score fraction, holdout loss, and explained variance side by
side.

Every run is a pure function of its spec and seed; parallel workers never
change results because each (cell, trial) derives its own seed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .geometry import NormSpec
from .greedy import GreedyConfig, git2achoppa
from .influence import AttackDelta, Insertion, construct_irs, score
from .knn import Dataset, zero_one_loss
from .search import SearchBudget, choppa

TRAIN_LABEL = "neg"
TARGET_LABEL = "pos"

FAMILIES = ("uniform", "normal")


@dataclass(frozen=True)
class SynthSpec:
    family: str
    m: int
    d: int
    n_targets: int = 10
    trials: int = 10
    k: int = 1
    norm: NormSpec = NormSpec(2.0)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise InputError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.m < 1 or self.d < 1 or self.n_targets < 1 or self.trials < 1:
            raise InputError("m, d, n_targets, trials must all be >= 1")


def _derive_seed(*parts) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([hash_part(p) for p in parts]))


def hash_part(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0x7FFFFFFF
    # stable across processes (no PYTHONHASHSEED dependence)
    acc = 0
    for ch in str(part):
        acc = (acc * 131 + ord(ch)) % 2_147_483_647
    return acc


def gen_synth(spec: SynthSpec) -> tuple[Dataset, Dataset]:
    """One synthetic instance: m decoy-labeled training points and n_targets
    attack-labeled targets, drawn i.i.d. from the family."""
    rng = _derive_seed(spec.seed, spec.family, spec.m, spec.d)
    if spec.family == "uniform":
        train_x = rng.uniform(0.0, 1.0, size=(spec.m, spec.d))
        target_x = rng.uniform(0.0, 1.0, size=(spec.n_targets, spec.d))
    else:
        train_x = rng.standard_normal((spec.m, spec.d))
        target_x = rng.standard_normal((spec.n_targets, spec.d))
    train = Dataset(train_x, (TRAIN_LABEL,) * spec.m)
    targets = Dataset(target_x, (TARGET_LABEL,) * spec.n_targets)
    return train, targets


def one_point_attack_score(
    train: Dataset,
    targets: Dataset,
    k: int,
    norm: NormSpec,
    time_budget: float | None = None,
    seed: int = 0,
) -> tuple[int, bool]:
    """Realized score of the best single insertion (and whether the search
    ran to completion)."""
    irs = construct_irs(train, targets, TARGET_LABEL, k, norm)
    active = [b for b in irs if b.ball.radius > 0.0]
    k_prime = math.ceil(k / 2)
    outcome = choppa(
        active,
        SearchBudget(wall_time=time_budget, max_multiplicity=k_prime),
        norm,
        seed=seed,
    )
    if outcome.best_point is None:
        return score(AttackDelta(), targets, train, k, norm), outcome.completed
    delta = AttackDelta(
        (Insertion(outcome.best_point, TARGET_LABEL, outcome.best_multiplicity),)
    )
    return score(delta, targets, train, k, norm), outcome.completed


@dataclass(frozen=True)
class SynthCell:
    family: str
    norm: str
    m: int
    d: int
    trials: int
    mean_score: float
    sem: float
    max_score: int
    completed_all: bool


def run_synth_grid(
    families,
    m_list,
    d_list,
    k: int,
    norm: NormSpec,
    trials: int,
    seed: int,
    time_per_attack: float | None = None,
    threads: int = 1,
) -> list[SynthCell]:
    """Mean best-one-point score per (family, m, d) cell, with its SEM."""
    jobs = []
    for family in families:
        for m in m_list:
            for d in d_list:
                for trial in range(trials):
                    jobs.append((family, m, d, trial))

    def run(job):
        family, m, d, trial = job
        spec = SynthSpec(
            family=family, m=m, d=d, k=k, norm=norm,
            seed=hash_part((seed, family, m, d, trial, "synth")),
        )
        train, targets = gen_synth(spec)
        attained, completed = one_point_attack_score(
            train, targets, k, norm, time_per_attack, seed=spec.seed
        )
        return job, attained, completed

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    by_cell: dict[tuple, list] = {}
    for (family, m, d, trial), attained, completed in results:
        by_cell.setdefault((family, m, d), []).append((attained, completed))

    cells = []
    for family in families:
        for m in m_list:
            for d in d_list:
                scores = [s for s, _ in by_cell[(family, m, d)]]
                arr = np.asarray(scores, dtype=float)
                sem = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
                cells.append(
                    SynthCell(
                        family=family,
                        norm=str(norm),
                        m=m,
                        d=d,
                        trials=len(arr),
                        mean_score=float(arr.mean()),
                        sem=sem,
                        max_score=int(arr.max()),
                        completed_all=all(c for _, c in by_cell[(family, m, d)]),
                    )
                )
    return cells


# ---------------------------------------------------------------------------
# Principal-component model
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray                 # (d,)
    components: np.ndarray           # (d', d), rows orthonormal
    explained_variance_ratio: float

    @property
    def d(self) -> int:
        return int(self.components.shape[1])

    @property
    def d_prime(self) -> int:
        return int(self.components.shape[0])


def pca_fit(train: Dataset, d_prime: int) -> PcaModel:
    """Top-d' principal components by full symmetric eigendecomposition."""
    if d_prime < 1 or d_prime > train.dimension:
        raise InputError(f"d_prime must lie in [1, {train.dimension}], got {d_prime}")
    weights = train.multiplicities.astype(float)
    total = weights.sum()
    if total < 2:
        raise InputError("need at least two samples (with multiplicity) to fit")
    mean = (train.features * weights[:, None]).sum(axis=0) / total
    centered = train.features - mean
    cov = (centered * weights[:, None]).T @ centered / (total - 1.0)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals, kind="stable")[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    components = eigvecs[:, order].T[:d_prime]
    denom = float(eigvals.sum())
    ratio = 1.0 if denom <= 0.0 else float(eigvals[:d_prime].sum() / denom)
    return PcaModel(mean=mean, components=components, explained_variance_ratio=min(ratio, 1.0))


def pca_transform(model: PcaModel, data: Dataset) -> Dataset:
    if data.dimension != model.d:
        raise InputError(
            f"data dimension {data.dimension} does not match model dimension {model.d}"
        )
    projected = (data.features - model.mean) @ model.components.T
    return Dataset(projected, data.labels, data.multiplicities.copy())


# ---------------------------------------------------------------------------
# Dimensionality-reduction defense
# ---------------------------------------------------------------------------

def gen_defense_instance(
    d: int = 64,
    n_per_class: int = 500,
    n_targets: int = 10,
    n_holdout: int = 200,
    separation: float = 6.0,
    target_spread: float = 1.6,
    seed: int = 0,
) -> tuple[Dataset, Dataset, Dataset]:
    """Two-class Gaussian instance for the defense experiment.

    Training blobs sit at +/- separation/2 along the first axis.  Targets are
    drawn from the decoy-class blob (inflated by target_spread, which keeps
    the low-dimension attack from saturating) but labeled with the attack
    class, so they all start misclassified.  The holdout carries true labels.
    """
    rng = _derive_seed(seed, "defense", d, n_per_class)
    half = separation / 2.0
    shift = np.zeros(d)
    shift[0] = half

    pos_x = rng.standard_normal((n_per_class, d)) + shift
    neg_x = rng.standard_normal((n_per_class, d)) - shift
    train = Dataset(
        np.vstack([pos_x, neg_x]),
        (TARGET_LABEL,) * n_per_class + (TRAIN_LABEL,) * n_per_class,
    )
    targets = Dataset(
        target_spread * rng.standard_normal((n_targets, d)) - shift,
        (TARGET_LABEL,) * n_targets,
    )
    n_half = n_holdout // 2
    hold_x = np.vstack(
        [
            rng.standard_normal((n_half, d)) + shift,
            rng.standard_normal((n_holdout - n_half, d)) - shift,
        ]
    )
    holdout = Dataset(hold_x, (TARGET_LABEL,) * n_half + (TRAIN_LABEL,) * (n_holdout - n_half))
    return train, targets, holdout


@dataclass(frozen=True)
class DefenseRow:
    d_prime: int
    explained_variance: float
    loss: float
    budget: int
    score_fraction: float
    score_after: int
    targets_total: int
    completed_all: bool


def run_defense(
    train: Dataset,
    targets: Dataset,
    holdout: Dataset,
    d_prime_list,
    budgets,
    k: int,
    norm: NormSpec,
    time_budget: float | None = None,
    seed: int = 0,
    threads: int = 1,
) -> list[DefenseRow]:
    """Attack strength, holdout loss, and variance explained per dimension.

    Using d_prime equal to the data dimension reproduces the undefended
    baseline (a pure rotation, which Euclidean attacks cannot tell apart).
    """
    target_classes = set(targets.labels)
    if len(target_classes) != 1:
        raise InputError("run_defense expects a homogeneous target pool")
    y_plus = next(iter(target_classes))

    prepared = []
    for d_prime in d_prime_list:
        model = pca_fit(train, d_prime)
        prepared.append(
            (
                d_prime,
                model.explained_variance_ratio,
                pca_transform(model, train),
                pca_transform(model, targets),
                pca_transform(model, holdout),
            )
        )

    def run(job):
        d_prime, vare, train_p, targets_p, holdout_p, budget = job
        cfg = GreedyConfig(
            budget=budget,
            total_time=time_budget,
            k=k,
            norm=norm,
            y_plus=y_plus,
            seed=hash_part((seed, d_prime, budget, "defense")),
        )
        report = git2achoppa(train_p, targets_p, cfg)
        loss = zero_one_loss(holdout_p, train_p, k, norm)
        total = targets_p.total_weight
        return DefenseRow(
            d_prime=d_prime,
            explained_variance=vare,
            loss=loss,
            budget=budget,
            score_fraction=report.score_after / total,
            score_after=report.score_after,
            targets_total=total,
            completed_all=all(c.completed for c in report.calls),
        )

    jobs = [
        (d_prime, vare, tr, tg, ho, budget)
        for (d_prime, vare, tr, tg, ho) in prepared
        for budget in budgets
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, jobs))
    else:
        rows = [run(j) for j in jobs]
    return rows
