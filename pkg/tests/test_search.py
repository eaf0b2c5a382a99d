import numpy as np
import pytest

from knnpoison import oracle
from knnpoison.geometry import Ball, NormSpec, intersect_witness
from knnpoison.influence import AttackDelta, Insertion, LabeledBall, construct_irs, score
from knnpoison.search import Hyperedge, SearchBudget, choppa, required_multiplicity
from knnpoison.testkit import InstanceGen, fixture_gadget_k2_disks, gen_instance

L2 = NormSpec.l2()
LINF = NormSpec.linf()


def lb(center, radius, value=1, cost=1, idx=0):
    return LabeledBall(Ball(np.asarray(center, dtype=float), radius), value, cost, idx)


class TestChoppa:
    def test_two_disjoint_regions(self):
        irs = [lb([0.0, 0.0], 1.0, idx=0), lb([5.0, 0.0], 1.0, idx=1)]
        out = choppa(irs, SearchBudget(max_multiplicity=1), L2)
        assert out.best_tsi == 1
        assert out.completed
        assert out.levels_explored == 2

    def test_gadget_k2_max_edge_size_two(self):
        irs = fixture_gadget_k2_disks()
        sizes = []
        out = choppa(
            irs,
            SearchBudget(max_multiplicity=1),
            L2,
            edge_observer=lambda e: sizes.append(len(e.members)),
        )
        assert out.completed
        assert out.best_tsi == 2
        assert max(sizes) == 2

    def test_empty_region_list(self):
        out = choppa([], SearchBudget(max_multiplicity=1), L2)
        assert out.best_point is None
        assert out.best_tsi == 0 and out.completed
        assert out.levels_explored == 0

    @pytest.mark.parametrize("norm", [L2, LINF], ids=["l2", "linf"])
    def test_matches_oracle_on_random_instances(self, norm):
        rng = np.random.default_rng(77)
        for i in range(12):
            d = int(rng.integers(1, 3))
            n = 10
            irs = [
                lb(rng.uniform(-1, 1, d), float(rng.uniform(0.3, 1.0)), idx=j)
                for j in range(n)
            ]
            out = choppa(irs, SearchBudget(max_multiplicity=1), norm, seed=i)
            want, _ = oracle.brute_single(irs, 1, norm, seed=i)
            assert out.completed
            assert out.best_tsi == want

    def test_duplicate_regions_counted_not_enumerated(self):
        base = lb([0.0, 0.0], 1.0, idx=0)
        copies = [lb([0.0, 0.0], 1.0, idx=i) for i in range(6)]
        edges = []
        out = choppa(
            copies,
            SearchBudget(max_multiplicity=1),
            L2,
            edge_observer=lambda e: edges.append(e.members),
        )
        assert out.best_tsi == 6
        assert edges == [(0,)]
        assert base.ball.key() == copies[1].ball.key()


class TestAnytimeContract:
    def _instance(self):
        gen = InstanceGen(target_range=(8, 10), seed=4)
        train, targets = gen_instance(gen, 3)
        irs = construct_irs(train, targets, "pos", 1, L2)
        return [b for b in irs if b.ball.radius > 0]

    def test_monotone_in_level_cap(self):
        active = self._instance()
        best = -1
        for cap in (1, 2, 3, 4, None):
            out = choppa(active, SearchBudget(max_multiplicity=1, max_level=cap), L2)
            assert out.best_tsi >= best
            best = out.best_tsi

    def test_level_cap_marks_incomplete(self):
        active = self._instance()
        full = choppa(active, SearchBudget(max_multiplicity=1), L2)
        capped = choppa(active, SearchBudget(max_multiplicity=1, max_level=1), L2)
        if full.levels_explored > 1:
            assert not capped.completed
        assert capped.best_tsi <= full.best_tsi

    def test_tiny_wall_clock_returns_quickly_and_soundly(self):
        active = self._instance()
        out = choppa(active, SearchBudget(wall_time=1e-9, max_multiplicity=1), L2)
        full = choppa(active, SearchBudget(max_multiplicity=1), L2)
        assert out.best_tsi <= full.best_tsi

    def test_memory_guard_aborts_incomplete(self):
        active = self._instance()
        out = choppa(
            active, SearchBudget(max_multiplicity=1, max_stored_edges=2), L2
        )
        assert not out.completed

    def test_soundness_of_reported_insertion(self):
        gen = InstanceGen(seed=41)
        for i in range(15):
            train, targets = gen_instance(gen, i)
            for k in (1, 3):
                irs = construct_irs(train, targets, "pos", k, L2)
                active = [b for b in irs if b.ball.radius > 0]
                out = choppa(
                    active, SearchBudget(max_multiplicity=(k + 1) // 2), L2, seed=i
                )
                if out.best_point is None:
                    continue
                delta = AttackDelta(
                    (Insertion(out.best_point, "pos", out.best_multiplicity),)
                )
                increase = score(delta, targets, train, k, L2) - score(
                    AttackDelta(), targets, train, k, L2
                )
                assert increase == out.best_tsi


class TestHellyShortcut:
    def test_d1_intervals_accepted_without_oracle_are_feasible(self):
        # five deeply overlapping 1-d regions; shortcut kicks in at size >= 3
        irs = [lb([0.1 * i], 1.0, idx=i) for i in range(5)]
        accepted = []
        out = choppa(
            irs,
            SearchBudget(max_multiplicity=1),
            L2,
            edge_observer=lambda e: accepted.append(e),
        )
        assert out.completed
        assert out.best_tsi == 5
        shortcut_edges = [e for e in accepted if e.witness is None]
        assert shortcut_edges, "expected Helly-accepted edges in d=1"
        for e in shortcut_edges:
            res = intersect_witness([irs[i].ball for i in e.members], L2)
            assert res.is_witness

    def test_d2_linf_boxes(self):
        rng = np.random.default_rng(8)
        irs = [
            lb(rng.uniform(-0.2, 0.2, 2), float(rng.uniform(0.8, 1.2)), idx=i)
            for i in range(6)
        ]
        accepted = []
        out = choppa(
            irs,
            SearchBudget(max_multiplicity=1),
            LINF,
            edge_observer=lambda e: accepted.append(e),
        )
        assert out.completed
        want, _ = oracle.brute_single(irs, 1, LINF)
        assert out.best_tsi == want
        for e in [e for e in accepted if e.witness is None]:
            assert intersect_witness([irs[i].ball for i in e.members], LINF).is_witness

    def test_shortcut_disabled_under_wall_clock(self):
        irs = [lb([0.1 * i], 1.0, idx=i) for i in range(5)]
        accepted = []
        out = choppa(
            irs,
            SearchBudget(wall_time=60.0, max_multiplicity=1),
            L2,
            edge_observer=lambda e: accepted.append(e),
        )
        assert out.completed
        assert out.best_tsi == 5
        assert all(e.witness is not None for e in accepted)


class TestConstrainedInsertions:
    def test_constraint_ball_redirects_the_attack(self):
        regions = [lb([0.0, 0.0], 1.0, idx=0), lb([5.0, 0.0], 1.0, idx=1)]
        allowed = Ball(np.array([5.0, 0.0]), 1.5)
        out = choppa(
            regions,
            SearchBudget(max_multiplicity=1),
            L2,
            constraint_balls=(allowed,),
        )
        assert out.completed
        assert out.best_tsi == 1
        assert np.linalg.norm(out.best_point - np.array([5.0, 0.0])) < 1.0
        assert np.linalg.norm(out.best_point - allowed.center) < allowed.radius

    def test_unreachable_regions_yield_nothing(self):
        regions = [lb([0.0, 0.0], 1.0, idx=0)]
        far = Ball(np.array([50.0, 0.0]), 1.0)
        out = choppa(
            regions, SearchBudget(max_multiplicity=1), L2, constraint_balls=(far,)
        )
        assert out.completed
        assert out.best_point is None and out.best_tsi == 0

    def test_constrained_witnesses_on_overlapping_family(self):
        regions = [lb([0.1 * i, 0.0], 1.0, idx=i) for i in range(4)]
        allowed = Ball(np.array([0.15, 0.8]), 0.5)
        out = choppa(
            regions,
            SearchBudget(max_multiplicity=1),
            L2,
            constraint_balls=(allowed,),
        )
        assert out.completed
        unconstrained = choppa(regions, SearchBudget(max_multiplicity=1), L2)
        assert out.best_tsi <= unconstrained.best_tsi
        if out.best_point is not None:
            from knnpoison.geometry import distance

            assert distance(out.best_point, allowed.center, L2) < allowed.radius


class TestRequiredMultiplicity:
    def test_uniform_costs(self):
        irs = [lb([0.0], 1.0, cost=1, idx=0), lb([0.1], 1.0, cost=1, idx=1)]
        edge = Hyperedge((0, 1), np.array([0.05]), 1)
        assert required_multiplicity(edge, irs) == 1

    def test_max_of_costs(self):
        irs = [lb([0.0], 1.0, cost=1, idx=0), lb([0.1], 1.0, cost=2, idx=1)]
        edge = Hyperedge((0, 1), np.array([0.05]), 2)
        assert required_multiplicity(edge, irs) == 2

    def test_worst_case_k5(self):
        irs = [lb([0.0], 1.0, cost=3, idx=0)]
        edge = Hyperedge((0,), np.array([0.0]), 3)
        assert required_multiplicity(edge, irs) == 3

    def test_reported_multiplicity_capped_by_budget(self):
        irs = [lb([0.0], 1.0, cost=1, idx=0), lb([0.1], 1.0, cost=2, idx=1)]
        out = choppa(irs, SearchBudget(max_multiplicity=1), L2)
        assert out.best_multiplicity <= 1
        assert out.best_tsi == 1
        out2 = choppa(irs, SearchBudget(max_multiplicity=2), L2)
        assert out2.best_tsi == 2
        assert out2.best_multiplicity == 2
