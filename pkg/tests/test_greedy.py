import math

import numpy as np
import pytest

from knnpoison import oracle
from knnpoison.errors import ContractError
from knnpoison.geometry import NormSpec, distance
from knnpoison.greedy import GreedyConfig, _exp_neg_bounds, git2achoppa, verify_bound
from knnpoison.influence import AttackDelta, construct_irs, score
from knnpoison.testkit import (
    InstanceGen,
    fixture_1d_three_targets,
    fixture_coverage_trap,
    gen_instance,
)
from fractions import Fraction

L2 = NormSpec.l2()
LINF = NormSpec.linf()


class TestGreedy:
    def test_three_targets_one_point(self):
        train, targets = fixture_1d_three_targets()
        cfg = GreedyConfig(budget=1, total_time=None, k=1, norm=L2, y_plus="pos")
        report = git2achoppa(train, targets, cfg)
        assert report.score_before == 0
        assert report.score_after == 3
        assert report.tsi_total == 3
        assert report.bound_factor == pytest.approx(1 - 1 / math.e, abs=1e-12)

    def test_k3_bound_factor(self):
        from knnpoison.testkit import fixture_k3_line

        train, targets = fixture_k3_line()
        cfg = GreedyConfig(budget=2, total_time=None, k=3, norm=L2, y_plus="pos")
        report = git2achoppa(train, targets, cfg)
        assert report.bound_factor == pytest.approx((1 - 1 / math.e) / 2, abs=1e-12)

    def test_zero_budget(self):
        train, targets = fixture_1d_three_targets()
        cfg = GreedyConfig(budget=0, total_time=None, k=1, norm=L2, y_plus="pos")
        report = git2achoppa(train, targets, cfg)
        assert report.score_after == report.score_before
        assert len(report.delta) == 0

    def test_budget_conservation_and_monotone_score(self):
        gen = InstanceGen(target_range=(4, 8), seed=55)
        for i in range(10):
            train, targets = gen_instance(gen, i)
            for k, b in ((1, 3), (3, 4)):
                cfg = GreedyConfig(budget=b, total_time=None, k=k, norm=L2,
                                   y_plus="pos", seed=i)
                report = git2achoppa(train, targets, cfg)
                assert report.delta.total_multiplicity <= b
                assert report.score_after >= report.score_before
                assert report.score_after - report.score_before == report.tsi_total

    def test_marginal_consistency(self):
        gen = InstanceGen(target_range=(4, 8), seed=19)
        for i in range(8):
            train, targets = gen_instance(gen, i)
            cfg = GreedyConfig(budget=3, total_time=None, k=1, norm=L2,
                               y_plus="pos", seed=i)
            report = git2achoppa(train, targets, cfg)
            running = []
            prev = report.score_before
            for call, ins in zip(report.calls, report.delta.insertions):
                running.append(ins)
                now = score(AttackDelta(tuple(running)), targets, train, 1, L2)
                assert now - prev == call.best_tsi
                prev = now


class TestCoverageTrap:
    def test_greedy_is_strictly_suboptimal_but_bounded(self):
        train, targets = fixture_coverage_trap()
        cfg = GreedyConfig(budget=2, total_time=None, k=1, norm=L2, y_plus="pos")
        report = git2achoppa(train, targets, cfg)
        opt = oracle.brute_attack(train, targets, 1, 2, L2)
        assert opt == 6
        assert report.tsi_total == 5
        assert report.tsi_total < opt
        assert verify_bound(report, opt)

    def test_first_pick_is_the_bait(self):
        train, targets = fixture_coverage_trap()
        irs = construct_irs(train, targets, "pos", 1, L2)
        radii = [round(b.ball.radius, 6) for b in irs]
        assert radii == [1.3, 1.55, 1.55, 1.55, 1.55, 1.3]
        best, witness = oracle.brute_single(irs, 1, L2)
        assert best == 4
        covered = {
            b.target_index
            for b in irs
            if distance(witness, b.ball.center, L2) < b.ball.radius
        }
        assert covered == {1, 2, 3, 4}


class TestVerifyBound:
    def test_trivially_true_when_greedy_optimal(self):
        train, targets = fixture_1d_three_targets()
        cfg = GreedyConfig(budget=1, total_time=None, k=1, norm=L2, y_plus="pos")
        report = git2achoppa(train, targets, cfg)
        opt = oracle.brute_attack(train, targets, 1, 1, L2)
        assert verify_bound(report, opt)

    @pytest.mark.parametrize("norm", [L2, LINF], ids=["l2", "linf"])
    def test_random_small_instances(self, norm):
        gen = InstanceGen(target_range=(3, 8), train_range=(3, 6), seed=123)
        for i in range(12):
            k = 1 if i % 2 else 3
            b = 2 + (i % 2)
            train, targets = gen_instance(gen, i)
            cfg = GreedyConfig(budget=b, total_time=None, k=k, norm=norm,
                               y_plus="pos", seed=i)
            report = git2achoppa(train, targets, cfg)
            assert report.bound_factor is not None
            opt = oracle.brute_attack(train, targets, k, b, norm, seed=i)
            assert verify_bound(report, opt - report.score_before)

    def test_contract_error_without_bound_factor(self):
        train, targets = fixture_1d_three_targets()
        cfg = GreedyConfig(budget=1, total_time=None, k=1, norm=L2, y_plus="pos")
        report = git2achoppa(train, targets, cfg)
        object.__setattr__(report, "bound_factor", None)
        with pytest.raises(ContractError):
            verify_bound(report, 3)

    def test_exact_comparison_brackets_exp(self):
        lo, hi = _exp_neg_bounds(Fraction(1), 40)
        assert lo < hi
        assert hi - lo < Fraction(1, 10**30)
        assert abs(float(lo) - 1 / math.e) < 1e-15
        # looser brackets still contain tighter ones
        lo8, hi8 = _exp_neg_bounds(Fraction(1), 8)
        assert lo8 <= lo and hi <= hi8

    def test_boundary_arithmetic(self):
        # tsi exactly at floor((1-1/e)*opt) must compare correctly
        train, targets = fixture_1d_three_targets()
        cfg = GreedyConfig(budget=1, total_time=None, k=1, norm=L2, y_plus="pos")
        report = git2achoppa(train, targets, cfg)  # tsi_total == 3
        # factor ~0.632: 3 >= 0.632*4 = 2.53 -> True; 3 >= 0.632*5 = 3.16 -> False
        assert verify_bound(report, 4)
        assert not verify_bound(report, 5)
