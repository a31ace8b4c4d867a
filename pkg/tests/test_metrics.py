"""Metrics tests, including exhaustive agreement with the brute-force oracle."""

import itertools

import numpy as np
import pytest

from memevidence import metrics
from memevidence.errors import ValidationError
from oracles import confusion_metrics


class TestCaseMetrics:
    def test_perfect_prediction(self):
        m = metrics.case_metrics([1, 0, 1], [1, 0, 1])
        assert (m.precision, m.recall, m.f1, m.accuracy, m.exact_match) == \
            (1.0, 1.0, 1.0, 1.0, 1.0)

    def test_hand_confusion_case(self):
        # gold positives {0, 2}, predicted positives {0, 1}, n = 4
        m = metrics.case_metrics([1, 1, 0, 0], [1, 0, 1, 0])
        assert m.precision == 0.5
        assert m.recall == 0.5
        assert m.f1 == 0.5
        assert m.accuracy == 0.5
        assert m.exact_match == 0.0

    def test_no_predictions_with_gold_positives(self):
        m = metrics.case_metrics([0, 0, 0], [1, 0, 1])
        assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)

    def test_both_empty_convention(self):
        m = metrics.case_metrics([0, 0], [0, 0])
        assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)
        assert m.exact_match == 1.0

    def test_exact_match_implies_perfect_scores(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            gold = rng.integers(0, 2, size=rng.integers(1, 11))
            m = metrics.case_metrics(gold, gold)
            assert m.exact_match == 1.0
            assert m.precision == m.recall == m.f1 == m.accuracy == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            metrics.case_metrics([1, 0], [1, 0, 1])

    def test_f1_upper_bound_and_permutation_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(1, 11))
            pred = rng.integers(0, 2, size=n)
            gold = rng.integers(0, 2, size=n)
            m = metrics.case_metrics(pred, gold)
            assert m.f1 <= min(1.0, m.precision + m.recall) + 1e-12
            perm = rng.permutation(n)
            mp = metrics.case_metrics(pred[perm], gold[perm])
            assert mp.accuracy == m.accuracy
            assert mp.f1 == m.f1


class TestOracleAgreement:
    def test_exhaustive_all_pairs_up_to_n4(self):
        for n in range(1, 5):
            for pred in itertools.product([0, 1], repeat=n):
                for gold in itertools.product([0, 1], repeat=n):
                    m = metrics.case_metrics(list(pred), list(gold))
                    p, r, f1, acc, em = confusion_metrics(pred, gold)
                    assert abs(m.precision - p) < 1e-9, (pred, gold)
                    assert abs(m.recall - r) < 1e-9, (pred, gold)
                    assert abs(m.f1 - f1) < 1e-9, (pred, gold)
                    assert abs(m.accuracy - acc) < 1e-9, (pred, gold)
                    assert m.exact_match == em, (pred, gold)

    def test_random_n10_cases(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            pred = rng.integers(0, 2, size=10)
            gold = rng.integers(0, 2, size=10)
            m = metrics.case_metrics(pred, gold)
            p, r, f1, acc, em = confusion_metrics(pred, gold)
            assert abs(m.precision - p) < 1e-9
            assert abs(m.recall - r) < 1e-9
            assert abs(m.f1 - f1) < 1e-9
            assert abs(m.accuracy - acc) < 1e-9
            assert m.exact_match == em


class TestAggregate:
    def test_exact_match_share_from_117_of_200(self):
        cases = []
        for i in range(200):
            if i < 117:
                cases.append(metrics.case_metrics([1, 0], [1, 0]))
            else:
                cases.append(metrics.case_metrics([0, 1], [1, 0]))
        report = metrics.aggregate(cases)
        assert report.exact_match == pytest.approx(0.585)

    def test_macro_f1_mean(self):
        a = metrics.case_metrics([1, 0], [1, 0])          # F1 = 1.0
        b = metrics.case_metrics([1, 1, 0, 0], [1, 0, 1, 0])  # F1 = 0.5
        report = metrics.aggregate([a, b])
        assert report.f1 == pytest.approx(0.75)

    def test_aggregate_matches_bruteforce_recomputation(self):
        rng = np.random.default_rng(3)
        raw = []
        cases = []
        for _ in range(200):
            n = int(rng.integers(1, 11))
            pred = rng.integers(0, 2, size=n)
            gold = rng.integers(0, 2, size=n)
            raw.append((pred, gold))
            cases.append(metrics.case_metrics(pred, gold))
        report = metrics.aggregate(cases)
        sums = np.zeros(5)
        for pred, gold in raw:
            sums += np.array(confusion_metrics(pred, gold))
        means = sums / len(raw)
        assert abs(report.precision - means[0]) < 1e-9
        assert abs(report.recall - means[1]) < 1e-9
        assert abs(report.f1 - means[2]) < 1e-9
        assert abs(report.accuracy - means[3]) < 1e-9
        assert abs(report.exact_match - means[4]) < 1e-9

    def test_means_within_case_range(self):
        rng = np.random.default_rng(4)
        cases = [metrics.case_metrics(rng.integers(0, 2, size=6),
                                      rng.integers(0, 2, size=6))
                 for _ in range(30)]
        report = metrics.aggregate(cases)
        for name in ("precision", "recall", "f1", "accuracy", "exact_match"):
            vals = [getattr(c, name) for c in cases]
            assert min(vals) <= getattr(report, name) <= max(vals)

    def test_empty_aggregate_rejected(self):
        with pytest.raises(ValidationError):
            metrics.aggregate([])
