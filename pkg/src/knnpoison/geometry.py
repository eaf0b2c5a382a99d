"""Norms, balls, and the shared feasibility oracle.

The feasibility question everything else reduces to: does a family of balls
have a common strict-interior point, and if so, where?  Strictness is governed
by a margin eps = EPS_SCALE * (smallest radius in the query), so tangent balls
never count as overlapping.

Under the max norm the answer is exact (per-coordinate interval
intersection).  Under finite p the deepest-point objective

    phi(x) = max_i ( ||x - c_i||_p - r_i )

is convex, and we minimize it with Polyak-style subgradient descent from the
centroid of the centers plus a few seeded random restarts.  Infeasibility is
declared heuristically (budget exhausted without reaching depth eps), which
is conservative toward Empty; the oracle module cross-checks this routine
with an independent method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

# Strictness margin factor. Tests may patch this (0 reintroduces the tangency
# bug that the acceptance suite is required to catch).
EPS_SCALE = 1e-7

# Iteration budget of the finite-p solver, per start point.
SUBGRADIENT_ITERS = 2000
SUBGRADIENT_RESTARTS = 3


@dataclass(frozen=True)
class NormSpec:
    """Which lp norm governs distance; p = math.inf selects the max norm."""

    p: float = 2.0

    def __post_init__(self) -> None:
        if not self.p > 1.0:
            raise InputError(f"norm exponent must satisfy p > 1, got {self.p!r}")

    @property
    def is_inf(self) -> bool:
        return math.isinf(self.p)

    @classmethod
    def l2(cls) -> "NormSpec":
        return cls(2.0)

    @classmethod
    def linf(cls) -> "NormSpec":
        return cls(math.inf)

    @classmethod
    def from_string(cls, text: str) -> "NormSpec":
        t = text.strip().lower()
        if t in ("linf", "inf"):
            return cls.linf()
        if t.startswith("l"):
            try:
                return cls(float(t[1:]))
            except ValueError as exc:
                raise InputError(f"unrecognized norm {text!r}") from exc
        raise InputError(f"unrecognized norm {text!r} (expected l2, linf, or l<p>)")

    def __str__(self) -> str:
        if self.is_inf:
            return "linf"
        if self.p == int(self.p):
            return f"l{int(self.p)}"
        return f"l{self.p!r}"


@dataclass(frozen=True, eq=False)
class Ball:
    """Center-plus-radius region; containment tests elsewhere are strict."""

    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        center = np.asarray(self.center, dtype=float)
        if center.ndim != 1 or center.size == 0:
            raise InputError("ball center must be a non-empty 1-d vector")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius >= 0.0:
            raise InputError(f"ball radius must be >= 0, got {self.radius}")

    @property
    def dimension(self) -> int:
        return int(self.center.shape[0])

    def key(self) -> tuple:
        """Exact identity key, usable for dedup/grouping."""
        return (self.center.tobytes(), self.radius)


@dataclass(frozen=True, eq=False)
class FeasibilityResult:
    """Outcome of a common-interior query.

    residual is max_i(distance(point, c_i) - r_i) at the reported point
    (negative inside every ball); for Empty it is the best value any probe
    achieved, kept for diagnostics.
    """

    point: np.ndarray | None
    residual: float

    @property
    def is_witness(self) -> bool:
        return self.point is not None


def distance(a, b, norm: NormSpec) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise InputError(f"distance needs equal-dimension vectors, got {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    if norm.is_inf:
        return float(diff.max())
    if norm.p == 2.0:
        return float(math.sqrt(float(np.dot(diff, diff))))
    return float(np.sum(diff ** norm.p) ** (1.0 / norm.p))


def distances_to_many(query, points: np.ndarray, norm: NormSpec) -> np.ndarray:
    """Distances from one query to each row of points, shape (n,)."""
    query = np.asarray(query, dtype=float)
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or query.ndim != 1 or points.shape[1] != query.shape[0]:
        raise InputError(
            f"shape mismatch: query {query.shape} vs points {points.shape}"
        )
    diff = points - query
    if norm.is_inf:
        return np.abs(diff).max(axis=1)
    if norm.p == 2.0:
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return np.sum(np.abs(diff) ** norm.p, axis=1) ** (1.0 / norm.p)


def strictness_eps(radii) -> float:
    """Margin below which overlap does not count, for one query's radii."""
    radii = np.asarray(radii, dtype=float)
    return EPS_SCALE * float(radii.min())


def pairwise_intersects(b1: Ball, b2: Ball, norm: NormSpec) -> bool:
    """Necessary-condition prefilter: strict interiors meet only if centers are
    closer than the radius sum minus the strictness margin."""
    if b1.dimension != b2.dimension:
        raise InputError("balls have different dimensions")
    eps = EPS_SCALE * min(b1.radius, b2.radius)
    return distance(b1.center, b2.center, norm) < b1.radius + b2.radius - eps


def residual_at(point, centers: np.ndarray, radii: np.ndarray, norm: NormSpec) -> float:
    """max_i(distance(point, c_i) - r_i); negative iff strictly inside all."""
    return float((distances_to_many(point, centers, norm) - radii).max())


def _dedup(balls: list[Ball]) -> tuple[np.ndarray, np.ndarray]:
    seen: set[tuple] = set()
    centers = []
    radii = []
    for b in balls:
        k = b.key()
        if k in seen:
            continue
        seen.add(k)
        centers.append(b.center)
        radii.append(b.radius)
    return np.asarray(centers, dtype=float), np.asarray(radii, dtype=float)


def _box_witness(centers: np.ndarray, radii: np.ndarray, eps: float) -> FeasibilityResult:
    lo = (centers - radii[:, None]).max(axis=0)
    hi = (centers + radii[:, None]).min(axis=0)
    mid = (lo + hi) / 2.0
    res = residual_at(mid, centers, radii, NormSpec.linf())
    if np.all(hi - lo > 0.0) and res <= -eps:
        return FeasibilityResult(point=mid, residual=res)
    return FeasibilityResult(point=None, residual=res)


def _deepest_pair_l2(c1, r1, c2, r2) -> tuple[np.ndarray, float]:
    """Analytic deepest point for two Euclidean balls (on the center line)."""
    sep = c2 - c1
    dist = float(math.sqrt(float(np.dot(sep, sep))))
    if dist <= 0.0:
        if r1 <= r2:
            return c1.copy(), -r1
        return c2.copy(), -r2
    t = (dist + r1 - r2) / 2.0
    t = min(max(t, 0.0), dist)
    x = c1 + sep * (t / dist)
    return x, max(t - r1, dist - t - r2)


def _subgradient(x: np.ndarray, center: np.ndarray, dist: float, p: float) -> np.ndarray:
    u = x - center
    if p == 2.0:
        return u / dist
    return np.sign(u) * np.abs(u) ** (p - 1.0) / dist ** (p - 1.0)


def _pairwise_lower_bound(centers: np.ndarray, radii: np.ndarray, norm: NormSpec) -> float:
    """Cheap lower bound on min phi: no point can sit deeper in two balls than
    half their overlap, so max over pairs of (dist - r_i - r_j)/2 bounds it."""
    n = centers.shape[0]
    bound = -math.inf
    for i in range(n):
        dists = distances_to_many(centers[i], centers[i + 1 :], norm)
        gaps = (dists - radii[i + 1 :] - radii[i]) / 2.0
        if len(gaps):
            bound = max(bound, float(gaps.max()))
    return bound


def _minimize_max_residual(
    centers: np.ndarray,
    radii: np.ndarray,
    norm: NormSpec,
    eps: float,
    seed: int,
    extra_inits,
) -> tuple[np.ndarray | None, float]:
    """Polyak-style subgradient descent on phi; returns the deepest point found.

    Returns (None, bound) when a pairwise bound already proves infeasibility.
    """
    n, d = centers.shape
    min_r = float(radii.min())
    scale = float(radii.mean())

    pair_bound = _pairwise_lower_bound(centers, radii, norm)
    if pair_bound > -eps:
        return None, pair_bound

    rng = np.random.default_rng(seed)
    starts = [centers.mean(axis=0)]
    if extra_inits is not None:
        starts.extend(np.asarray(s, dtype=float) for s in extra_inits)
    for _ in range(SUBGRADIENT_RESTARTS):
        starts.append(centers.mean(axis=0) + 0.5 * scale * rng.standard_normal(d))

    best_x = starts[0].copy()
    best_phi = residual_at(best_x, centers, radii, norm)
    # Exit once clearly interior: deep on the instance scale, or at a depth
    # that already dwarfs the strictness margin (thin but safe pockets).
    deep_enough = -0.25 * min_r
    safe_enough = -max(200.0 * eps, 1e-9 * scale)
    delta_floor = max(0.25 * eps, 1e-14 * scale)

    for start in starts:
        if best_phi <= deep_enough or (best_phi <= safe_enough and start is not starts[0]):
            break
        x = np.asarray(start, dtype=float).copy()
        run_best = math.inf
        delta = 0.3 * scale
        stall = 0
        for _ in range(SUBGRADIENT_ITERS):
            dists = distances_to_many(x, centers, norm)
            vals = dists - radii
            j = int(np.argmax(vals))
            phi = float(vals[j])
            if phi < best_phi:
                best_phi = phi
                best_x = x.copy()
            if phi < run_best - 1e-12 * scale:
                run_best = phi
                stall = 0
            else:
                stall += 1
                if stall > 40:
                    if delta <= delta_floor:
                        break
                    delta *= 0.25
                    stall = 0
            if phi <= deep_enough or best_phi <= safe_enough:
                break
            if dists[j] <= 0.0:
                # sitting exactly on the argmax center: nudge deterministically
                x = x + 1e-9 * scale
                continue
            g = _subgradient(x, centers[j], float(dists[j]), norm.p)
            gn2 = float(np.dot(g, g))
            if gn2 <= 0.0:
                break
            step = (phi - (run_best - delta)) / gn2
            x = x - step * g
    return best_x, best_phi


def intersect_witness(
    balls: list[Ball],
    norm: NormSpec,
    seed: int = 0,
    extra_inits=None,
) -> FeasibilityResult:
    """Decide whether the balls share a strict-interior point.

    Exact under the max norm; numeric convex feasibility under finite p.  The
    returned witness is the deepest point the solver found, not merely the
    first feasible one.  Duplicate balls are deduplicated first.
    """
    if not balls:
        raise InputError("intersect_witness requires at least one ball")
    dim = balls[0].dimension
    for b in balls:
        if b.dimension != dim:
            raise InputError("balls have inconsistent dimensions")
        if not b.radius > 0.0:
            raise InputError("zero-radius balls must be filtered before feasibility")

    centers, radii = _dedup(balls)
    eps = strictness_eps(radii)

    if norm.is_inf:
        return _box_witness(centers, radii, eps)

    if len(radii) == 1:
        return FeasibilityResult(point=centers[0].copy(), residual=-float(radii[0]))

    if len(radii) == 2 and norm.p == 2.0:
        x, phi = _deepest_pair_l2(centers[0], float(radii[0]), centers[1], float(radii[1]))
        if phi <= -eps:
            return FeasibilityResult(point=x, residual=phi)
        return FeasibilityResult(point=None, residual=phi)

    x, phi = _minimize_max_residual(centers, radii, norm, eps, seed, extra_inits)
    if x is not None and phi <= -eps:
        return FeasibilityResult(point=x, residual=phi)
    return FeasibilityResult(point=None, residual=phi)
