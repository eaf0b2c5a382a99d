import numpy as np

from knnpoison import geometry
from knnpoison.geometry import Ball, NormSpec, intersect_witness
from knnpoison.influence import LabeledBall, construct_irs
from knnpoison.testkit import InstanceGen, all_graphs_up_to, gen_instance
from knnpoison.testkit.acceptance import check_cost_bound, check_strict_membership

L2 = NormSpec.l2()


class TestInstanceGen:
    def test_deterministic_replay(self):
        gen = InstanceGen(seed=5)
        a_train, a_targets = gen_instance(gen, 3)
        b_train, b_targets = gen_instance(gen, 3)
        assert np.array_equal(a_train.features, b_train.features)
        assert np.array_equal(a_targets.features, b_targets.features)

    def test_dimension_within_range(self):
        gen = InstanceGen(dim_range=(2, 3), seed=1)
        for i in range(20):
            train, targets = gen_instance(gen, i)
            assert 2 <= train.dimension <= 3
            assert train.dimension == targets.dimension

    def test_overlap_rate_calibration(self):
        # at least 30% of instances must admit a feasible size-2 edge
        gen = InstanceGen(seed=0)
        overlapping = 0
        total = 200
        for i in range(total):
            train, targets = gen_instance(gen, i)
            irs = construct_irs(train, targets, "pos", 1, L2)
            active = [b for b in irs if b.ball.radius > 0]
            found = False
            for a in range(len(active)):
                for b in range(a + 1, len(active)):
                    if intersect_witness(
                        [active[a].ball, active[b].ball], L2, seed=i
                    ).is_witness:
                        found = True
                        break
                if found:
                    break
            overlapping += found
        assert overlapping / total >= 0.30

    def test_instances_fit_oracle_limits(self):
        gen = InstanceGen(seed=2)
        for i in range(50):
            _, targets = gen_instance(gen, i)
            assert targets.n <= 14


class TestGraphEnumeration:
    def test_counts_match_known_sequence(self):
        # graphs up to isomorphism on 1..5 vertices: 1, 2, 4, 11, 34
        graphs = all_graphs_up_to(5)
        by_n = {}
        for n, edges in graphs:
            by_n[n] = by_n.get(n, 0) + 1
        assert by_n == {1: 1, 2: 2, 3: 4, 4: 11, 5: 34}

    def test_edges_normalized(self):
        for n, edges in all_graphs_up_to(3):
            for i, j in edges:
                assert 1 <= i < j <= n


class TestMutationChecks:
    def test_zero_margin_breaks_strict_membership(self, monkeypatch):
        assert check_strict_membership()
        monkeypatch.setattr(geometry, "EPS_SCALE", 0.0)
        assert not check_strict_membership()

    def test_off_by_one_cost_breaks_the_bound(self):
        # the pseudocode's cost (one more than the relabeled count) violates
        # cost <= ceil(k/2) already at k=1
        good = [LabeledBall(Ball(np.array([0.0]), 1.0), 1, 1, 0)]
        assert check_cost_bound(good, 1)
        mutated = [LabeledBall(Ball(np.array([0.0]), 1.0), 1, 2, 0)]
        assert not check_cost_bound(mutated, 1)
