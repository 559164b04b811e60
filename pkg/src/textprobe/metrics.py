"""Classification metrics plus the explainability/robustness quantities.

The three headline numbers:

* degree of explainability (DoE): per sentence, the fraction of words whose
  absolute attribution score strictly exceeds the population standard
  deviation of all the sentence's scores; per model, the mean over sentences.
* adversarial robustness (Ar): accuracy under attack divided by accuracy
  before the attack, over the examples that were actually attacked.
* attack resilience: Ar / DoE.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .attack import FAILED, SKIPPED, SUCCESSFUL, AttackOutcome
from .errors import TextProbeError
from .lime import Explanation


class MetricError(TextProbeError):
    """A metric is undefined for the given inputs."""


# ---------------------------------------------------------------------------
# Confusion-matrix metrics
# ---------------------------------------------------------------------------


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int], n_classes: int) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(y_true, y_pred, strict=True):
        cm[t, p] += 1
    return cm


def classification_metrics(cm: np.ndarray) -> dict:
    """Accuracy plus per-class and aggregated precision/recall/F1.

    Zero-denominator precision, recall, and F1 are defined as 0. Weighted
    aggregates weight classes by true support; macro aggregates are plain
    means over classes.
    """
    cm = np.asarray(cm)
    total = cm.sum()
    if total < 1:
        raise MetricError("empty confusion matrix")
    diag = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1).astype(np.float64)
    predicted = cm.sum(axis=0).astype(np.float64)

    def safe_div(num, den):
        return np.divide(num, den, out=np.zeros_like(num, dtype=np.float64),
                         where=den > 0)

    precision = safe_div(diag, predicted)
    recall = safe_div(diag, support)
    f1 = safe_div(2 * precision * recall, precision + recall)
    weights = support / total
    return {
        "accuracy": float(diag.sum() / total),
        "per_class": [
            {"precision": float(precision[c]), "recall": float(recall[c]),
             "f1": float(f1[c]), "support": int(support[c])}
            for c in range(cm.shape[0])
        ],
        "macro_precision": float(precision.mean()),
        "macro_recall": float(recall.mean()),
        "macro_f1": float(f1.mean()),
        "weighted_precision": float(np.dot(weights, precision)),
        "weighted_recall": float(np.dot(weights, recall)),
        "weighted_f1": float(np.dot(weights, f1)),
    }


# ---------------------------------------------------------------------------
# ROC AUC
# ---------------------------------------------------------------------------


def auc_roc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability a positive outranks a negative, ties counting one half.

    Computed with midranks (rank-sum form), which is algebraically identical
    to pairwise counting but O(n log n).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos + n_neg != labels.size:
        raise MetricError("labels must be binary 0/1")
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC needs at least one positive and one negative example")
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    ranks = np.empty(len(scores), dtype=np.float64)
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        midrank = (i + j) / 2.0 + 1.0
        ranks[order[i : j + 1]] = midrank
        i = j + 1
    rank_sum_pos = float(ranks[labels == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auc_roc_per_class(probs: np.ndarray, labels: Sequence[int]) -> list[float | None]:
    """One-vs-rest AUC per class; None where a class lacks both outcomes."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    out: list[float | None] = []
    for c in range(probs.shape[1]):
        binary = (labels == c).astype(np.int64)
        if binary.sum() == 0 or binary.sum() == len(binary):
            out.append(None)
        else:
            out.append(auc_roc(probs[:, c], binary))
    return out


def auc_roc_ovr(probs: np.ndarray, labels: Sequence[int]) -> float:
    """One-vs-rest macro AUC over the classes present with both outcomes."""
    labels_arr = np.asarray(labels)
    if len(set(labels_arr.tolist())) < 2:
        raise MetricError("one-vs-rest AUC needs at least two observed classes")
    per_class = [a for a in auc_roc_per_class(probs, labels) if a is not None]
    return float(np.mean(per_class))


# ---------------------------------------------------------------------------
# Degree of explainability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DoEResult:
    per_sentence: tuple[tuple[int, float], ...]
    model_doe: float


def doe_scores(scores: Sequence[float]) -> float:
    """Fraction of |score| values strictly above their population sigma.

    Degenerate vectors fall out of the same rule: all-zero scores give 0
    (nothing exceeds sigma = 0), any other all-equal vector gives 1.
    """
    magnitudes = np.abs(np.asarray(scores, dtype=np.float64))
    if magnitudes.size == 0:
        raise MetricError("empty score vector")
    sigma = float(magnitudes.std())
    return float((magnitudes > sigma).sum() / magnitudes.size)


def doe_sentence(explanation: Explanation) -> float:
    if not explanation.weights:
        raise MetricError("explanation has no scored words")
    return doe_scores([score for _, _, score in explanation.weights])


def doe_model(explanations: Sequence[Explanation]) -> DoEResult:
    """Mean per-sentence DoE, keeping the per-sentence values for reports."""
    if not explanations:
        raise MetricError("no explanations given")
    per_sentence = tuple((i, doe_sentence(e)) for i, e in enumerate(explanations))
    mean = math.fsum(v for _, v in per_sentence) / len(per_sentence)
    return DoEResult(per_sentence=per_sentence, model_doe=mean)


# ---------------------------------------------------------------------------
# Adversarial robustness and attack resilience
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RobustnessResult:
    accuracy_before: float
    accuracy_under_attack: float
    ar: float
    attacked_count: int
    skipped_count: int


def adversarial_robustness(outcomes: Sequence[AttackOutcome]) -> RobustnessResult:
    """Accuracy ratio over the attacked (non-skipped) examples.

    Before: original predictions against labels. Under attack: the same
    examples with the perturbed predictions of Successful/Failed records
    substituted. Skipped records are excluded from both sides.
    """
    attacked = [o for o in outcomes if o.kind in (SUCCESSFUL, FAILED)]
    skipped_count = sum(1 for o in outcomes if o.kind == SKIPPED)
    if not attacked:
        raise MetricError("no non-skipped outcomes; adversarial robustness undefined")
    correct_before = 0
    correct_after = 0
    for o in attacked:
        before_pred = int(np.argmax(o.original_probs))
        after_probs = o.perturbed_probs if o.perturbed_probs is not None else o.original_probs
        after_pred = int(np.argmax(after_probs))
        correct_before += int(before_pred == o.label)
        correct_after += int(after_pred == o.label)
    accuracy_before = correct_before / len(attacked)
    accuracy_under = correct_after / len(attacked)
    if accuracy_before == 0.0:
        warnings.warn("accuracy before attack is 0; reporting Ar = 0", stacklevel=2)
        ar = 0.0
    else:
        ar = accuracy_under / accuracy_before
    return RobustnessResult(
        accuracy_before=accuracy_before,
        accuracy_under_attack=accuracy_under,
        ar=ar,
        attacked_count=len(attacked),
        skipped_count=skipped_count,
    )


def attack_resilience(ar: float, doe: float) -> float:
    """Adversarial robustness divided by degree of explainability."""
    if doe <= 0.0:
        raise MetricError("attack resilience undefined for DoE <= 0")
    return ar / doe


# ---------------------------------------------------------------------------
# Statistics helpers for reports and acceptance checks
# ---------------------------------------------------------------------------


def _midranks(values: Sequence[float]) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    sorted_vals = values[order]
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Rank correlation with midranks for ties; nan when either side is constant."""
    if len(xs) != len(ys):
        raise ValueError("length mismatch")
    if len(xs) < 2:
        raise ValueError("need at least two points")
    rx = _midranks(xs)
    ry = _midranks(ys)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = math.sqrt(float((dx ** 2).sum()) * float((dy ** 2).sum()))
    if denom == 0.0:
        return float("nan")
    return float((dx * dy).sum() / denom)


def paired_randomization_test(
    x: Sequence[float], y: Sequence[float], n_resamples: int = 10000, seed: int = 0
) -> float:
    """One-sided sign-flip test of mean(x - y) > 0 on paired observations.

    Under the null the pair members are exchangeable, so each difference's
    sign is flipped with probability 1/2; the p-value is the add-one
    fraction of resampled means at least as large as the observed mean.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size == 0:
        raise ValueError("x and y must be equal-length non-empty vectors")
    diffs = x - y
    observed = diffs.mean()
    rng = np.random.default_rng(seed)
    signs = rng.integers(0, 2, size=(n_resamples, diffs.size)) * 2 - 1
    resampled = (signs * diffs).mean(axis=1)
    exceed = int((resampled >= observed - 1e-15).sum())
    return (1 + exceed) / (n_resamples + 1)
