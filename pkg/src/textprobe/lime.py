"""Model-agnostic local explanations via weighted ridge surrogates.

For one document: perturb it by deleting word subsets (binary masks over
token positions), query the black box on every perturbation, weight each
perturbation by its similarity to the intact document, fit a weighted ridge
regression from mask bits to the probability of the target class, and read
per-word scores off the coefficients.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import TextProbeError
from .seeding import derive_seed
from .textprep import TokenizedDoc

EXHAUSTIVE_LIMIT = 20


class SurrogateError(TextProbeError):
    """The weighted ridge system could not be solved."""


@dataclass(frozen=True)
class LimeConfig:
    """Sampling and surrogate-fit parameters.

    ``kernel_width=None`` uses 0.75 * sqrt(n_tokens); ``math.inf`` makes all
    perturbations equally weighted. ``top_k=None`` keeps every position.
    ``exhaustive=True`` enumerates all 2^n masks (n <= 20).
    """

    n_samples: int = 1000
    kernel_width: float | None = None
    ridge_lambda: float = 1.0
    top_k: int | None = 10
    seed: int = 0
    exhaustive: bool = False

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.kernel_width is not None and not self.kernel_width > 0:
            raise ValueError("kernel_width must be positive")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be >= 0")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass(frozen=True)
class Explanation:
    """Per-word attribution scores for one prediction.

    ``weights`` holds (position, token, score) sorted by descending |score|,
    position ascending on ties. Scores are signed surrogate coefficients.
    """

    instance: TokenizedDoc
    target_class: int
    weights: tuple[tuple[int, str, float], ...]
    intercept: float
    local_r2: float

    def score_by_position(self) -> dict[int, float]:
        return {pos: score for pos, _, score in self.weights}

    def to_record(self) -> dict:
        return {
            "text": " ".join(self.instance.tokens),
            "target_class": self.target_class,
            "weights": [[pos, tok, score] for pos, tok, score in self.weights],
            "intercept": self.intercept,
            "local_r2": self.local_r2,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def explanation_from_record(record: dict, instance: TokenizedDoc) -> Explanation:
    return Explanation(
        instance=instance,
        target_class=int(record["target_class"]),
        weights=tuple((int(p), str(t), float(s)) for p, t, s in record["weights"]),
        intercept=float(record["intercept"]),
        local_r2=float(record["local_r2"]),
    )


# ---------------------------------------------------------------------------
# Perturbation masks
# ---------------------------------------------------------------------------


def sample_masks(n_tokens: int, n_samples: int, seed: int,
                 exhaustive: bool = False) -> np.ndarray:
    """Binary masks over token positions, the all-ones anchor first.

    Sampled mode: each mask disables a uniformly drawn number of positions
    in [1, n_tokens], choosing the subset uniformly. Exhaustive mode returns
    all 2^n_tokens masks (descending integer encoding, so the anchor is
    first and the all-zeros mask last).
    """
    if n_tokens < 1:
        raise ValueError("n_tokens must be >= 1")
    if exhaustive:
        if n_tokens > EXHAUSTIVE_LIMIT:
            raise ValueError(
                f"exhaustive enumeration limited to {EXHAUSTIVE_LIMIT} tokens, got {n_tokens}"
            )
        count = 1 << n_tokens
        codes = np.arange(count - 1, -1, -1, dtype=np.uint32)
        return ((codes[:, None] >> np.arange(n_tokens, dtype=np.uint32)) & 1).astype(np.int8)
    rng = np.random.default_rng(seed)
    masks = np.ones((n_samples, n_tokens), dtype=np.int8)
    for row in range(1, n_samples):
        k = int(rng.integers(1, n_tokens + 1))
        off = rng.choice(n_tokens, size=k, replace=False)
        masks[row, off] = 0
    return masks


def apply_mask(doc: TokenizedDoc, mask: Sequence[int]) -> str:
    """Drop the zero-bit tokens and rejoin the rest with single spaces."""
    if len(mask) != len(doc.tokens):
        raise ValueError(f"mask length {len(mask)} != token count {len(doc.tokens)}")
    return " ".join(tok for tok, bit in zip(doc.tokens, mask) if bit)


def kernel_weight(mask: Sequence[int], kernel_width: float) -> float:
    """exp(-D^2 / width^2) where D is cosine distance from the intact mask.

    For binary masks D = 1 - sqrt(k / n) with k active bits; the all-zeros
    mask is defined to be at distance 1 (instead of 0/0).
    """
    mask = np.asarray(mask)
    n = mask.size
    k = int(mask.sum())
    distance = 1.0 if k == 0 else 1.0 - math.sqrt(k / n)
    return math.exp(-(distance ** 2) / (kernel_width ** 2))


# ---------------------------------------------------------------------------
# Weighted ridge surrogate
# ---------------------------------------------------------------------------


def fit_surrogate(
    masks: np.ndarray,
    weights: np.ndarray,
    targets: np.ndarray,
    ridge_lambda: float,
) -> tuple[np.ndarray, float]:
    """Solve min_b,b0 sum_i w_i (y_i - b0 - b.z_i)^2 + lambda ||b||^2.

    The intercept is unpenalized. Solved through the normal equations with a
    Cholesky factorization; a singular system (possible when lambda is 0)
    raises :class:`SurrogateError`.
    """
    Z = np.asarray(masks, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] < 2:
        raise ValueError("need at least 2 masks")
    n, p = Z.shape
    design = np.concatenate([np.ones((n, 1)), Z], axis=1)
    wd = design * w[:, None]
    gram = design.T @ wd
    if ridge_lambda:
        gram[1:, 1:] += ridge_lambda * np.eye(p)
    rhs = wd.T @ y
    try:
        chol = scipy.linalg.cho_factor(gram, lower=True)
        beta = scipy.linalg.cho_solve(chol, rhs)
    except np.linalg.LinAlgError as exc:
        raise SurrogateError(
            "singular weighted ridge system; use ridge_lambda > 0"
        ) from exc
    return beta[1:], float(beta[0])


def _weighted_r2(design_pred: np.ndarray, targets: np.ndarray, weights: np.ndarray) -> float:
    w_sum = weights.sum()
    if w_sum <= 0:
        return 0.0
    mean = float(np.dot(weights, targets) / w_sum)
    tss = float(np.dot(weights, (targets - mean) ** 2))
    rss = float(np.dot(weights, (targets - design_pred) ** 2))
    if tss == 0.0:
        return 1.0 if rss <= 1e-30 else 0.0
    r2 = 1.0 - rss / tss
    return min(1.0, max(0.0, r2))


# ---------------------------------------------------------------------------
# End-to-end explanation
# ---------------------------------------------------------------------------


def default_kernel_width(n_tokens: int) -> float:
    return 0.75 * math.sqrt(n_tokens)


def explain(
    model,
    doc: TokenizedDoc,
    target_class: int | None = None,
    config: LimeConfig = LimeConfig(),
) -> Explanation:
    """Explain one document: masks -> model calls -> weighted ridge fit.

    ``target_class=None`` explains the class the model assigns to the intact
    document. Deterministic for a fixed (model, doc, config).
    """
    n_tokens = len(doc.tokens)
    if n_tokens < 1:
        raise ValueError("cannot explain an empty document")
    masks = sample_masks(n_tokens, config.n_samples, config.seed,
                         exhaustive=config.exhaustive)
    texts = [apply_mask(doc, m) for m in masks]
    probs = model.predict_proba(texts)
    if target_class is None:
        target_class = int(np.argmax(probs[0]))

    width = config.kernel_width
    if width is None:
        width = default_kernel_width(n_tokens)
    weights = np.array([kernel_weight(m, width) for m in masks])
    targets = probs[:, target_class]

    coef, intercept = fit_surrogate(masks, weights, targets, config.ridge_lambda)
    predictions = intercept + masks.astype(np.float64) @ coef
    r2 = _weighted_r2(predictions, targets, weights)

    order = sorted(range(n_tokens), key=lambda i: (-abs(coef[i]), i))
    if config.top_k is not None:
        order = order[: config.top_k]
    scored = tuple((i, doc.tokens[i], float(coef[i])) for i in order)
    return Explanation(instance=doc, target_class=target_class, weights=scored,
                       intercept=intercept, local_r2=r2)


def explain_corpus(
    model,
    docs: Sequence[TokenizedDoc],
    config: LimeConfig,
    target_classes: Sequence[int] | None = None,
) -> list[Explanation]:
    """Explain every document with a per-document derived seed.

    Seeding by document index keeps results identical no matter how the
    documents are distributed over workers.
    """
    out = []
    for i, doc in enumerate(docs):
        doc_config = replace(config, seed=derive_seed(config.seed, "doc", i))
        target = None if target_classes is None else target_classes[i]
        out.append(explain(model, doc, target_class=target, config=doc_config))
    return out
