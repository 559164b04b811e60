"""The black-box classifier contract and shared training bits.

Everything downstream (explanations, attacks, metrics) consumes models only
through :class:`ProbClassifier`: a batch of raw texts in, one probability
vector per text out. Vectors are non-negative and sum to 1, and prediction
is a pure function of the trained state, so repeated calls agree exactly.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..textprep import TextPipeline, Vocabulary, default_pipeline


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-training hyperparameters shared by the trainable models."""

    optimizer: str = "adam"
    learning_rate: float = 1e-3
    epochs: int = 5
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.optimizer != "adam":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


class ProbClassifier(ABC):
    """Uniform interface: raw texts -> per-class probability vectors.

    Trained models are immutable, so ``predict_proba`` may be called from
    any number of workers concurrently.
    """

    kind: str = "abstract"

    def __init__(self, n_classes: int, vocab: Vocabulary, pipeline: TextPipeline):
        self.n_classes = n_classes
        self.vocab = vocab
        self.pipeline = pipeline

    @abstractmethod
    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        """Return an array of shape (len(texts), n_classes) of probabilities."""

    def predict(self, texts: Sequence[str]) -> np.ndarray:
        return np.argmax(self.predict_proba(texts), axis=1)

    def _tokenize_batch(self, texts: Sequence[str]) -> list[list[str]]:
        return [self.pipeline(t) for t in texts]


def resolve_pipeline(pipeline: TextPipeline | None) -> TextPipeline:
    return pipeline if pipeline is not None else default_pipeline()


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by max subtraction."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy of integer ``labels`` under row logits."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1))
    picked = shifted[np.arange(len(labels)), labels]
    return float(np.mean(logz - picked))
