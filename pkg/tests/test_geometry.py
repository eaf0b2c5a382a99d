import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knnpoison import oracle
from knnpoison.errors import InputError
from knnpoison.geometry import (
    Ball,
    NormSpec,
    distance,
    intersect_witness,
    pairwise_intersects,
    residual_at,
    strictness_eps,
)

L2 = NormSpec.l2()
LINF = NormSpec.linf()


class TestNormSpec:
    def test_rejects_p_not_above_one(self):
        with pytest.raises(InputError):
            NormSpec(1.0)
        with pytest.raises(InputError):
            NormSpec(0.5)

    def test_string_round_trip(self):
        for text in ["l2", "linf", "l3", "l2.5"]:
            assert str(NormSpec.from_string(text)) == text

    @given(st.floats(min_value=1.0001, max_value=50.0))
    def test_any_finite_p_round_trips(self, p):
        norm = NormSpec(p)
        assert NormSpec.from_string(str(norm)).p == norm.p


class TestDistance:
    def test_three_four_five(self):
        assert distance((0, 0), (3, 4), L2) == 5.0

    def test_identity_is_zero(self):
        x = np.array([1.5, -2.0, 7.0])
        for norm in (L2, LINF, NormSpec(3.0)):
            assert distance(x, x, norm) == 0.0

    def test_linf_max_gap(self):
        assert distance((1, -2), (4, 2), LINF) == 4.0

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            distance((1, 2), (1, 2, 3), L2)

    @given(
        st.lists(st.floats(-10, 10), min_size=1, max_size=5),
        st.lists(st.floats(-10, 10), min_size=1, max_size=5),
    )
    @settings(max_examples=60)
    def test_symmetry_and_nonnegativity(self, a, b):
        n = min(len(a), len(b))
        a, b = np.array(a[:n]), np.array(b[:n])
        for norm in (L2, LINF):
            d1 = distance(a, b, norm)
            assert d1 == distance(b, a, norm)
            assert d1 >= 0.0


class TestPairwise:
    def test_overlapping_unit_disks(self):
        assert pairwise_intersects(Ball([0, 0], 1.0), Ball([1, 0], 1.0), L2)

    def test_tangency_is_not_strict_overlap(self):
        assert not pairwise_intersects(Ball([0, 0], 1.0), Ball([2, 0], 1.0), L2)

    def test_linf_boxes_overlap(self):
        # per-axis intervals [-1,1] vs [0.5,2.5] overlap on both axes
        assert pairwise_intersects(Ball([0, 0], 1.0), Ball([1.5, 1.5], 1.0), LINF)


class TestIntersectWitness:
    def test_two_unit_disks(self):
        res = intersect_witness([Ball([0, 0], 1.0), Ball([1, 0], 1.0)], L2)
        assert res.is_witness and res.residual < 0
        for c in ([0, 0], [1, 0]):
            assert distance(res.point, np.array(c, dtype=float), L2) < 1.0

    def test_single_ball_returns_center(self):
        res = intersect_witness([Ball([2, 3], 1.5)], L2)
        assert res.is_witness
        assert np.array_equal(res.point, [2.0, 3.0])
        assert res.residual == -1.5

    def test_gadget_triple_is_empty(self):
        r, eps = 9.0, 0.5
        balls = [
            Ball([r, 0.0], r),
            Ball([0.0, r], r),
            Ball([-r, -r], 2 ** 0.5 * (r - eps)),
        ]
        assert not intersect_witness(balls, L2).is_witness

    def test_empty_list_rejected(self):
        with pytest.raises(InputError):
            intersect_witness([], L2)

    def test_mixed_dimensions_rejected(self):
        with pytest.raises(InputError):
            intersect_witness([Ball([0.0], 1.0), Ball([0.0, 0.0], 1.0)], L2)

    def test_zero_radius_rejected(self):
        with pytest.raises(InputError):
            intersect_witness([Ball([0.0], 0.0)], L2)

    def test_duplicates_deduplicated(self):
        b = Ball([1.0, 1.0], 2.0)
        res = intersect_witness([b, Ball([1.0, 1.0], 2.0), b], L2)
        assert res.is_witness and res.residual == -2.0


def _random_balls(rng, n, d):
    return [Ball(rng.uniform(-1, 1, d), float(rng.uniform(0.2, 1.0))) for _ in range(n)]


class TestSolverInvariants:
    @pytest.mark.parametrize("norm", [L2, LINF], ids=["l2", "linf"])
    def test_witness_soundness_and_residual(self, norm):
        rng = np.random.default_rng(11)
        found = 0
        for i in range(60):
            balls = _random_balls(rng, int(rng.integers(2, 6)), int(rng.integers(1, 4)))
            res = intersect_witness(balls, norm, seed=i)
            if not res.is_witness:
                continue
            found += 1
            dists = [distance(res.point, b.center, norm) for b in balls]
            assert all(dd < b.radius for dd, b in zip(dists, balls))
            achieved = max(dd - b.radius for dd, b in zip(dists, balls))
            assert abs(achieved - res.residual) <= 1e-9
            for a in range(len(balls)):
                for b2 in range(a + 1, len(balls)):
                    assert pairwise_intersects(balls[a], balls[b2], norm)
        assert found > 10

    @pytest.mark.parametrize("norm", [L2, LINF], ids=["l2", "linf"])
    def test_empty_is_monotone_under_supersets(self, norm):
        rng = np.random.default_rng(23)
        checked = 0
        for i in range(80):
            balls = _random_balls(rng, int(rng.integers(2, 6)), 2)
            res = intersect_witness(balls, norm, seed=i)
            if res.is_witness:
                continue
            extra = Ball(rng.uniform(-1, 1, 2), float(rng.uniform(0.2, 1.0)))
            assert not intersect_witness(balls + [extra], norm, seed=i).is_witness
            checked += 1
        assert checked > 5

    def test_linf_matches_independent_interval_code(self):
        rng = np.random.default_rng(37)
        for i in range(120):
            balls = _random_balls(rng, int(rng.integers(1, 7)), int(rng.integers(1, 4)))
            mine = intersect_witness(balls, LINF, seed=i)
            centers = [list(b.center) for b in balls]
            radii = [b.radius for b in balls]
            eps = strictness_eps(np.asarray(radii))
            other = oracle._interval_feasible(centers, radii, eps)
            assert mine.is_witness == (other is not None)

    def test_residual_at_matches_definition(self):
        balls = [Ball([0.0, 0.0], 2.0), Ball([1.0, 0.0], 1.5)]
        centers = np.stack([b.center for b in balls])
        radii = np.array([b.radius for b in balls])
        point = np.array([0.5, 0.2])
        want = max(distance(point, b.center, L2) - b.radius for b in balls)
        assert residual_at(point, centers, radii, L2) == pytest.approx(want, abs=1e-15)
