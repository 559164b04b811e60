import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from textprobe.attack import FAILED, SKIPPED, SUCCESSFUL, AttackOutcome
from textprobe.lime import Explanation
from textprobe.metrics import (
    auc_roc_per_class,
    MetricError,
    adversarial_robustness,
    attack_resilience,
    auc_roc,
    auc_roc_ovr,
    classification_metrics,
    confusion_matrix,
    doe_model,
    doe_scores,
    doe_sentence,
    paired_randomization_test,
    spearman,
)
from textprobe.textprep import TokenizedDoc


def pairwise_auc_oracle(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def outcome(kind, label, orig, pert=None):
    return AttackOutcome(
        kind=kind, label=label, raw_text="", original_text="",
        perturbed_text=None if pert is None else "x",
        original_probs=tuple(orig),
        perturbed_probs=None if pert is None else tuple(pert),
    )


class TestClassificationMetrics:
    def test_perfect_diagonal(self):
        cm = np.diag([5, 3, 2])
        stats = classification_metrics(cm)
        assert stats["accuracy"] == 1.0
        for row in stats["per_class"]:
            assert row["precision"] == 1.0 and row["recall"] == 1.0 and row["f1"] == 1.0

    def test_binary_example(self):
        cm = np.array([[8, 2], [3, 7]])
        stats = classification_metrics(cm)
        assert stats["accuracy"] == pytest.approx(0.75)
        assert stats["per_class"][1]["precision"] == pytest.approx(7 / 9)
        assert stats["per_class"][1]["recall"] == pytest.approx(0.7)

    def test_zero_predicted_class_precision_zero(self):
        cm = np.array([[4, 0], [2, 0]])  # nothing predicted as class 1
        stats = classification_metrics(cm)
        assert stats["per_class"][1]["precision"] == 0.0
        assert stats["per_class"][1]["recall"] == 0.0

    def test_against_recount_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            n_classes = int(rng.integers(2, 5))
            y_true = rng.integers(0, n_classes, size=60).tolist()
            y_pred = rng.integers(0, n_classes, size=60).tolist()
            cm = confusion_matrix(y_true, y_pred, n_classes)
            stats = classification_metrics(cm)
            acc = sum(t == p for t, p in zip(y_true, y_pred)) / 60
            assert stats["accuracy"] == pytest.approx(acc, abs=1e-12)
            for c in range(n_classes):
                tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
                fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
                fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
                prec = tp / (tp + fp) if tp + fp else 0.0
                rec = tp / (tp + fn) if tp + fn else 0.0
                assert stats["per_class"][c]["precision"] == pytest.approx(prec, abs=1e-12)
                assert stats["per_class"][c]["recall"] == pytest.approx(rec, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(MetricError):
            classification_metrics(np.zeros((2, 2), dtype=int))


class TestAuc:
    def test_perfect_separation(self):
        assert auc_roc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_stated_example(self):
        scores = [0.9, 0.8, 0.7, 0.85]
        labels = [1, 1, 0, 0]
        assert auc_roc(scores, labels) == pytest.approx(0.75)

    def test_all_ties_half(self):
        assert auc_roc([0.5] * 6, [1, 0, 1, 0, 1, 0]) == 0.5

    def test_single_class_rejected(self):
        with pytest.raises(MetricError):
            auc_roc([0.5, 0.6], [1, 1])

    def test_non_binary_labels_rejected(self):
        with pytest.raises(MetricError, match="binary"):
            auc_roc([0.5, 0.6, 0.7], [0, 1, 2])

    def test_matches_pairwise_oracle_with_ties(self):
        rng = np.random.default_rng(4)
        for _ in range(40):
            n = int(rng.integers(4, 40))
            scores = rng.choice([0.0, 0.25, 0.5, 0.75, 1.0], size=n).tolist()
            labels = rng.integers(0, 2, size=n).tolist()
            if len(set(labels)) < 2:
                labels[0] = 1 - labels[0]
            assert auc_roc(scores, labels) == pytest.approx(
                pairwise_auc_oracle(scores, labels), abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(5)
        scores = (rng.integers(0, 16, size=30) / 16.0).tolist()
        labels = rng.integers(0, 2, size=30).tolist()
        labels[0], labels[1] = 0, 1
        base = auc_roc(scores, labels)
        assert auc_roc([2 * s + 1 for s in scores], labels) == base
        assert auc_roc([s ** 3 for s in scores], labels) == base
        assert auc_roc([math.exp(s) for s in scores], labels) == base

    def test_ovr_macro(self):
        probs = np.array([
            [0.8, 0.1, 0.1],
            [0.2, 0.6, 0.2],
            [0.1, 0.2, 0.7],
            [0.5, 0.4, 0.1],
        ])
        labels = [0, 1, 2, 1]
        got = auc_roc_ovr(probs, labels)
        expected = np.mean([
            pairwise_auc_oracle(probs[:, 0].tolist(), [1, 0, 0, 0]),
            pairwise_auc_oracle(probs[:, 1].tolist(), [0, 1, 0, 1]),
            pairwise_auc_oracle(probs[:, 2].tolist(), [0, 0, 1, 0]),
        ])
        assert got == pytest.approx(expected, abs=1e-12)

    def test_per_class_skips_absent_classes(self):
        probs = np.array([[0.9, 0.05, 0.05], [0.2, 0.7, 0.1], [0.6, 0.3, 0.1]])
        labels = [0, 1, 0]  # class 2 never occurs
        per_class = auc_roc_per_class(probs, labels)
        assert per_class[2] is None
        assert per_class[0] is not None and per_class[1] is not None
        assert auc_roc_ovr(probs, labels) == pytest.approx(
            np.mean([per_class[0], per_class[1]]), abs=1e-12)


class TestDoE:
    def test_stated_fixture(self):
        assert doe_scores([0.5, 0.1, 0.05, 0.05]) == pytest.approx(0.25)

    def test_all_zero(self):
        assert doe_scores([0.0, 0.0, 0.0]) == 0.0

    def test_all_equal_nonzero(self):
        assert doe_scores([0.3, 0.3, 0.3, 0.3]) == 1.0

    def test_signs_ignored(self):
        assert doe_scores([-0.5, 0.1, -0.05, 0.05]) == pytest.approx(0.25)

    @given(st.lists(st.floats(min_value=-5, max_value=5, allow_nan=False),
                    min_size=1, max_size=30))
    @settings(max_examples=200, deadline=None)
    def test_unit_interval(self, scores):
        assert 0.0 <= doe_scores(scores) <= 1.0

    @given(st.lists(st.integers(min_value=-40, max_value=40).map(lambda k: k / 8.0),
                    min_size=1, max_size=30),
           st.sampled_from([0.25, 0.5, 2.0, 4.0, 8.0]))
    @settings(max_examples=200, deadline=None)
    def test_scale_invariance(self, scores, scale):
        # power-of-two scales multiply |s| and sigma exactly, so the strict
        # comparisons (and hence DoE) cannot move
        assert doe_scores([s * scale for s in scores]) == doe_scores(scores)

    def test_doe_sentence_and_model(self):
        doc = TokenizedDoc(raw="a b c d", tokens=("a", "b", "c", "d"), label=0)
        expl = Explanation(instance=doc, target_class=0,
                           weights=((0, "a", 0.5), (1, "b", 0.1),
                                    (2, "c", 0.05), (3, "d", 0.05)),
                           intercept=0.0, local_r2=1.0)
        assert doe_sentence(expl) == pytest.approx(0.25)
        doc2 = TokenizedDoc(raw="x", tokens=("x",), label=0)
        expl2 = Explanation(instance=doc2, target_class=0,
                            weights=((0, "x", 0.4),), intercept=0.0, local_r2=1.0)
        result = doe_model([expl, expl2])
        assert result.model_doe == pytest.approx((0.25 + 1.0) / 2)
        assert result.per_sentence == ((0, 0.25), (1, 1.0))

    def test_empty_rejected(self):
        with pytest.raises(MetricError):
            doe_scores([])


class TestRobustness:
    def make_fixture(self):
        outcomes = []
        # 8 correct before; 4 flipped by the attack
        for i in range(8):
            if i < 4:
                outcomes.append(outcome(SUCCESSFUL, 1, (0.2, 0.8), (0.7, 0.3)))
            else:
                outcomes.append(outcome(FAILED, 1, (0.3, 0.7), (0.4, 0.6)))
        # 2 wrong before and still wrong
        outcomes.append(outcome(FAILED, 0, (0.1, 0.9), (0.2, 0.8)))
        outcomes.append(outcome(FAILED, 0, (0.4, 0.6), (0.45, 0.55)))
        return outcomes

    def test_enumerated_fixture(self):
        rob = adversarial_robustness(self.make_fixture())
        assert rob.accuracy_before == 0.8
        assert rob.accuracy_under_attack == 0.4
        assert rob.ar == 0.5
        assert rob.attacked_count == 10

    def test_no_successful_attacks(self):
        outcomes = [outcome(FAILED, 1, (0.2, 0.8), (0.3, 0.7)) for _ in range(5)]
        assert adversarial_robustness(outcomes).ar == 1.0

    def test_all_flipped_gives_zero(self):
        outcomes = [outcome(SUCCESSFUL, 1, (0.2, 0.8), (0.8, 0.2)) for _ in range(5)]
        assert adversarial_robustness(outcomes).ar == 0.0

    def test_zero_accuracy_before_warns(self):
        outcomes = [outcome(FAILED, 0, (0.1, 0.9), (0.1, 0.9))]
        with pytest.warns(UserWarning, match="Ar = 0"):
            assert adversarial_robustness(outcomes).ar == 0.0

    def test_skipped_excluded_and_all_skipped_rejected(self):
        skipped = AttackOutcome(kind=SKIPPED, label=0, raw_text="", original_text="",
                                skip_reason="too_long")
        mixed = self.make_fixture() + [skipped] * 3
        rob = adversarial_robustness(mixed)
        assert rob.attacked_count == 10 and rob.skipped_count == 3
        assert rob.ar == 0.5
        with pytest.raises(MetricError):
            adversarial_robustness([skipped])


class TestAttackResilience:
    def test_arithmetic(self):
        assert attack_resilience(0.5, 0.25) == 2.0
        assert attack_resilience(1.0, 1.0) == 1.0

    def test_zero_doe_rejected(self):
        with pytest.raises(MetricError, match="DoE"):
            attack_resilience(0.5, 0.0)


class TestSpearman:
    def test_two_point_anticorrelation(self):
        assert spearman([0.8, 0.2], [0.3, 0.9]) == -1.0

    def test_midranks_with_ties(self):
        assert spearman([1.0, 1.0, 2.0], [1.0, 1.0, 2.0]) == pytest.approx(1.0)

    def test_constant_side_nan(self):
        assert math.isnan(spearman([1.0, 1.0], [0.2, 0.4]))


class TestPairedRandomization:
    def test_obvious_difference_significant(self):
        x = [1.0] * 30
        y = [0.0] * 30
        assert paired_randomization_test(x, y, n_resamples=2000, seed=0) < 0.01

    def test_identical_samples_not_significant(self):
        x = [1.0, 0.0] * 15
        assert paired_randomization_test(x, x, n_resamples=2000, seed=0) > 0.9

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(size=25)
        y = rng.uniform(size=25)
        a = paired_randomization_test(x, y, n_resamples=500, seed=3)
        assert a == paired_randomization_test(x, y, n_resamples=500, seed=3)
