"""Multinomial logistic regression over bag-of-words counts."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import TrainingError
from ..seeding import derive_seed
from ..textprep import TextPipeline, TokenizedDoc, Vocabulary
from .base import ProbClassifier, TrainConfig, cross_entropy, resolve_pipeline, softmax
from .features import bow_matrix


class LogisticModel(ProbClassifier):
    kind = "logistic"

    def __init__(
        self,
        coef: np.ndarray,
        bias: np.ndarray,
        vocab: Vocabulary,
        pipeline: TextPipeline,
        loss_history: tuple[float, ...] = (),
    ):
        super().__init__(n_classes=coef.shape[0], vocab=vocab, pipeline=pipeline)
        self.coef = coef  # (classes, vocab)
        self.bias = bias  # (classes,)
        self.loss_history = loss_history

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        X = bow_matrix(self._tokenize_batch(texts), self.vocab)
        return softmax(X @ self.coef.T + self.bias)


def train_logistic(
    train: Sequence[TokenizedDoc],
    vocab: Vocabulary,
    config: TrainConfig,
    pipeline: TextPipeline | None = None,
    n_classes: int | None = None,
) -> LogisticModel:
    """Minimize mean cross-entropy with mini-batch Adam from a zero init.

    The per-epoch shuffle and the batch summation order are fixed by the
    seed, so retraining with the same inputs reproduces the model exactly.
    Records the average training loss of each epoch on the returned model.
    """
    if not train:
        raise ValueError("empty training set")
    if n_classes is None:
        n_classes = max(d.label for d in train) + 1
    if n_classes < 2:
        raise ValueError("training set must contain at least 2 classes")
    pipeline = resolve_pipeline(pipeline)

    X = bow_matrix([d.tokens for d in train], vocab)
    y = np.array([d.label for d in train], dtype=np.int64)
    n = len(train)

    coef = np.zeros((n_classes, len(vocab)), dtype=np.float64)
    bias = np.zeros(n_classes, dtype=np.float64)
    params = {"coef": coef, "bias": bias}

    from .optim import Adam

    adam = Adam(params, config.learning_rate)
    rng = np.random.default_rng(derive_seed(config.seed, "logistic-train"))
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), y] = 1.0

    history: list[float] = []
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        batch_losses: list[float] = []
        for start in range(0, n, config.batch_size):
            rows = perm[start : start + config.batch_size]
            Xb, yb = X[rows], y[rows]
            with np.errstate(over="ignore", invalid="ignore"):
                logits = Xb @ coef.T + bias
                loss = cross_entropy(logits, yb)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch} batch {start // config.batch_size}; "
                    "learning rate is likely too high"
                )
            probs = softmax(logits)
            grad_logits = (probs - onehot[rows]) / len(rows)
            adam.step({"coef": grad_logits.T @ Xb, "bias": grad_logits.sum(axis=0)})
            batch_losses.append(loss)
        history.append(float(np.mean(batch_losses)))

    return LogisticModel(coef=coef, bias=bias, vocab=vocab, pipeline=pipeline,
                         loss_history=tuple(history))
