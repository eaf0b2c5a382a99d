"""The victim learner: k-nearest-neighbor classification over a multiset.

Tie handling is deterministic everywhere: distance ties break by ascending
insertion index, plurality ties by ascending class id (classes are the sorted
distinct labels).  Search is exhaustive; desk-scale data needs no index.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InputError
from .geometry import NormSpec, distances_to_many


@dataclass(frozen=True, eq=False)
class LabeledPoint:
    features: np.ndarray
    label: str
    multiplicity: int = 1

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=float)
        if features.ndim != 1:
            raise InputError("point features must be a 1-d vector")
        object.__setattr__(self, "features", features)
        if self.multiplicity < 1:
            raise InputError(f"multiplicity must be >= 1, got {self.multiplicity}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable ordered multiset of labeled points with uniform dimension."""

    features: np.ndarray                  # (n, d)
    labels: tuple[str, ...]               # length n
    multiplicities: np.ndarray = field(default=None)  # (n,) positive ints

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=float)
        if features.ndim != 2:
            raise InputError("dataset features must be a 2-d array")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))
        if len(self.labels) != features.shape[0]:
            raise InputError("labels and features disagree in length")
        mult = self.multiplicities
        if mult is None:
            mult = np.ones(features.shape[0], dtype=np.int64)
        mult = np.asarray(mult, dtype=np.int64)
        if mult.shape != (features.shape[0],):
            raise InputError("multiplicities and features disagree in length")
        if len(mult) and mult.min() < 1:
            raise InputError("multiplicities must be >= 1")
        object.__setattr__(self, "multiplicities", mult)

    @classmethod
    def from_points(cls, points) -> "Dataset":
        pts = list(points)
        if not pts:
            raise InputError("cannot build a dataset from zero points")
        return cls(
            features=np.stack([p.features for p in pts]),
            labels=tuple(p.label for p in pts),
            multiplicities=np.array([p.multiplicity for p in pts], dtype=np.int64),
        )

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.features.shape[1])

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels)))

    @property
    def total_weight(self) -> int:
        return int(self.multiplicities.sum())

    def point(self, i: int) -> LabeledPoint:
        return LabeledPoint(self.features[i], self.labels[i], int(self.multiplicities[i]))

    def __iter__(self):
        return (self.point(i) for i in range(self.n))

    def __len__(self) -> int:
        return self.n

    def with_insertions(self, insertions) -> "Dataset":
        """New dataset with (point, label, multiplicity) triples appended."""
        ins = list(insertions)
        if not ins:
            return self
        extra = np.asarray([np.asarray(p, dtype=float) for p, _, _ in ins])
        if extra.shape[1] != self.dimension:
            raise InputError("insertion dimension does not match dataset")
        return Dataset(
            features=np.vstack([self.features, extra]),
            labels=self.labels + tuple(str(lbl) for _, lbl, _ in ins),
            multiplicities=np.concatenate(
                [self.multiplicities, np.array([m for _, _, m in ins], dtype=np.int64)]
            ),
        )


def plurality(labels) -> str:
    """Winner among labels (each one vote); ties go to the smallest class id."""
    votes: dict[str, int] = {}
    for lbl in labels:
        votes[lbl] = votes.get(lbl, 0) + 1
    return _winner(votes)


def _winner(votes: dict[str, int]) -> str:
    best = max(votes.values())
    return min(lbl for lbl, v in votes.items() if v == best)


def _check_query(train: Dataset, k: int) -> None:
    if train.n == 0:
        raise InputError("empty training set")
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if train.total_weight < k:
        raise InputError(
            f"training set holds {train.total_weight} points (with multiplicity) < k={k}"
        )


def knn_neighbors(query, train: Dataset, k: int, norm: NormSpec):
    """The k nearest training slots as (point index, distance, label) triples.

    A point of multiplicity m occupies m consecutive slots.  Ordering is by
    (distance, insertion index), strictly deterministic.
    """
    _check_query(train, k)
    dists = distances_to_many(query, train.features, norm)
    order = np.argsort(dists, kind="stable")
    out = []
    remaining = k
    for idx in order:
        take = min(remaining, int(train.multiplicities[idx]))
        out.extend([(int(idx), float(dists[idx]), train.labels[idx])] * take)
        remaining -= take
        if remaining == 0:
            break
    return out


def classify(query, train: Dataset, k: int, norm: NormSpec) -> str:
    """Plurality label of the k nearest training points, counting multiplicity."""
    _check_query(train, k)
    dists = distances_to_many(query, train.features, norm)
    return _vote(dists, train, k)


def _vote(dists: np.ndarray, train: Dataset, k: int) -> str:
    order = np.argsort(dists, kind="stable")
    votes: dict[str, int] = {}
    remaining = k
    for idx in order:
        take = min(remaining, int(train.multiplicities[idx]))
        lbl = train.labels[idx]
        votes[lbl] = votes.get(lbl, 0) + take
        remaining -= take
        if remaining == 0:
            break
    return _winner(votes)


def distance_matrix(queries: np.ndarray, points: np.ndarray, norm: NormSpec) -> np.ndarray:
    if norm.is_inf:
        return cdist(queries, points, metric="chebyshev")
    if norm.p == 2.0:
        return cdist(queries, points, metric="euclidean")
    return cdist(queries, points, metric="minkowski", p=norm.p)


def classify_many(queries: np.ndarray, train: Dataset, k: int, norm: NormSpec) -> list[str]:
    _check_query(train, k)
    queries = np.asarray(queries, dtype=float)
    dmat = distance_matrix(queries, train.features, norm)
    return [_vote(dmat[i], train, k) for i in range(queries.shape[0])]


def zero_one_loss(holdout: Dataset, train: Dataset, k: int, norm: NormSpec) -> float:
    """Fraction of holdout weight misclassified by the k-NN rule."""
    if holdout.n == 0:
        raise InputError("empty holdout set")
    preds = classify_many(holdout.features, train, k, norm)
    wrong = sum(
        int(holdout.multiplicities[i])
        for i, pred in enumerate(preds)
        if pred != holdout.labels[i]
    )
    return wrong / holdout.total_weight


# ---------------------------------------------------------------------------
# CSV interchange: header f0..f{d-1}, then `label`, optionally `mult`.
# ---------------------------------------------------------------------------

def write_dataset_csv(dataset: Dataset, path) -> None:
    d = dataset.dimension
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"f{i}" for i in range(d)] + ["label", "mult"])
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.features[i]]
            row.append(dataset.labels[i])
            row.append(str(int(dataset.multiplicities[i])))
            writer.writerow(row)


def read_dataset_csv(path) -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty CSV") from None
        header = [h.strip() for h in header]
        has_mult = header and header[-1] == "mult"
        label_pos = len(header) - (2 if has_mult else 1)
        if label_pos < 1 or header[label_pos] != "label":
            raise InputError(f"{path}: expected feature columns, then 'label' (then optional 'mult')")
        expected = [f"f{i}" for i in range(label_pos)]
        if header[:label_pos] != expected:
            raise InputError(f"{path}: feature columns must be named f0..f{label_pos - 1}")
        feats, labels, mults = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < label_pos + 1:
                raise InputError(f"{path}:{lineno}: too few columns")
            try:
                feats.append([float(v) for v in row[:label_pos]])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: bad feature value ({exc})") from None
            labels.append(row[label_pos])
            if has_mult and len(row) > label_pos + 1 and row[label_pos + 1] != "":
                try:
                    mults.append(int(row[label_pos + 1]))
                except ValueError:
                    raise InputError(f"{path}:{lineno}: bad mult value {row[label_pos + 1]!r}") from None
            else:
                mults.append(1)
    if not feats:
        raise InputError(f"{path}: no data rows")
    return Dataset(
        features=np.asarray(feats, dtype=float),
        labels=tuple(labels),
        multiplicities=np.asarray(mults, dtype=np.int64),
    )
