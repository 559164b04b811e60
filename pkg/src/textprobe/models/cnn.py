"""Word-embedding CNN with parallel kernel widths and max-over-time pooling.

Architecture: embedding -> 1-D convolutions of widths 3/4/5 -> ReLU ->
max-over-time pooling -> concatenation -> linear layer -> softmax. Gradients
are computed analytically (no autodiff), which keeps the whole model in
plain float64 numpy and makes finite-difference checks possible.

Padding: sequences shorter than the widest kernel are right-padded with the
reserved id 0, whose embedding row is pinned at zero. Pooling only looks at
windows that fit inside max(true length, kernel width), so appending extra
padding never changes the output.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import TrainingError
from ..seeding import derive_seed
from ..textprep import TextPipeline, TokenizedDoc, Vocabulary
from .base import ProbClassifier, TrainConfig, cross_entropy, resolve_pipeline, softmax
from .features import pad_id_batch
from .optim import Adam

KERNEL_SIZES = (3, 4, 5)
_INVALID = -1.0  # sentinel below any ReLU output, masks windows past the valid range


def init_params(
    vocab_size: int, embed_dim: int, n_filters: int, n_classes: int, seed: int
) -> dict[str, np.ndarray]:
    """Uniform(-0.05, 0.05) init; embedding row 0 (pad/unknown) stays zero."""
    rng = np.random.default_rng(derive_seed(seed, "cnn-init"))

    def u(*shape):
        return rng.uniform(-0.05, 0.05, size=shape)

    params: dict[str, np.ndarray] = {"embed": u(vocab_size + 1, embed_dim)}
    params["embed"][0] = 0.0
    for k in KERNEL_SIZES:
        params[f"conv{k}_w"] = u(n_filters, k, embed_dim)
        params[f"conv{k}_b"] = u(n_filters)
    params["out_w"] = u(n_classes, n_filters * len(KERNEL_SIZES))
    params["out_b"] = u(n_classes)
    return params


def forward(
    params: dict[str, np.ndarray], ids: np.ndarray, lengths: np.ndarray
) -> tuple[np.ndarray, dict]:
    """Compute logits for a padded id batch; returns (logits, cache)."""
    X = params["embed"][ids]  # (B, L, d)
    batch, width, _ = X.shape
    pooled_parts = []
    cache: dict = {"X": X, "ids": ids, "per_kernel": {}}
    for k in KERNEL_SIZES:
        w = params[f"conv{k}_w"]
        windows = sliding_window_view(X, k, axis=1)  # (B, T, d, k)
        conv = np.einsum("btdk,fkd->btf", windows, w) + params[f"conv{k}_b"]
        relu = np.maximum(conv, 0.0)
        n_windows = conv.shape[1]
        # windows that start past max(length, k) - k are padding-only tails
        valid = np.maximum(lengths, k) - k + 1  # (B,)
        t_index = np.arange(n_windows)
        masked = np.where(t_index[None, :, None] < valid[:, None, None], relu, _INVALID)
        argmax_t = masked.argmax(axis=1)  # (B, f)
        pooled = np.take_along_axis(masked, argmax_t[:, None, :], axis=1)[:, 0, :]
        pooled_parts.append(pooled)
        cache["per_kernel"][k] = {"windows": windows, "conv": conv, "argmax_t": argmax_t}
    h = np.concatenate(pooled_parts, axis=1)  # (B, 3f)
    logits = h @ params["out_w"].T + params["out_b"]
    cache["h"] = h
    return logits, cache


def loss_and_grads(
    params: dict[str, np.ndarray],
    ids: np.ndarray,
    lengths: np.ndarray,
    labels: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy on the batch and its analytic parameter gradients."""
    logits, cache = forward(params, ids, lengths)
    batch = ids.shape[0]
    loss = cross_entropy(logits, labels)

    probs = softmax(logits)
    dlogits = probs.copy()
    dlogits[np.arange(batch), labels] -= 1.0
    dlogits /= batch

    grads: dict[str, np.ndarray] = {}
    grads["out_w"] = dlogits.T @ cache["h"]
    grads["out_b"] = dlogits.sum(axis=0)
    dh = dlogits @ params["out_w"]  # (B, 3f)

    X = cache["X"]
    dX = np.zeros_like(X)
    n_filters = params["out_w"].shape[1] // len(KERNEL_SIZES)
    for slot, k in enumerate(KERNEL_SIZES):
        kc = cache["per_kernel"][k]
        dpooled = dh[:, slot * n_filters : (slot + 1) * n_filters]  # (B, f)
        conv = kc["conv"]
        argmax_t = kc["argmax_t"]
        # route gradient to the selected window, zero where ReLU was flat
        dconv = np.zeros_like(conv)
        b_idx = np.arange(batch)[:, None]
        f_idx = np.arange(n_filters)[None, :]
        chosen = conv[b_idx, argmax_t, f_idx]
        np.add.at(dconv, (b_idx, argmax_t, f_idx), dpooled * (chosen > 0.0))
        grads[f"conv{k}_w"] = np.einsum("btf,btdk->fkd", dconv, kc["windows"])
        grads[f"conv{k}_b"] = dconv.sum(axis=(0, 1))
        dwin = np.einsum("btf,fkd->btdk", dconv, params[f"conv{k}_w"])
        n_windows = conv.shape[1]
        for a in range(k):
            dX[:, a : a + n_windows, :] += dwin[:, :, :, a]

    dembed = np.zeros_like(params["embed"])
    np.add.at(dembed, cache["ids"], dX)
    dembed[0] = 0.0  # pad/unknown row is frozen
    grads["embed"] = dembed
    return loss, grads


class CnnModel(ProbClassifier):
    kind = "cnn"

    def __init__(
        self,
        params: dict[str, np.ndarray],
        vocab: Vocabulary,
        pipeline: TextPipeline,
        n_classes: int,
        embed_dim: int,
        n_filters: int,
        config: TrainConfig | None = None,
        loss_history: tuple[float, ...] = (),
    ):
        super().__init__(n_classes=n_classes, vocab=vocab, pipeline=pipeline)
        self.params = params
        self.embed_dim = embed_dim
        self.n_filters = n_filters
        self.config = config
        self.loss_history = loss_history

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        ids, lengths = pad_id_batch(self._tokenize_batch(texts), self.vocab,
                                    min_len=max(KERNEL_SIZES))
        logits, _ = forward(self.params, ids, lengths)
        return softmax(logits)


def train_cnn(
    train: Sequence[TokenizedDoc],
    vocab: Vocabulary,
    config: TrainConfig,
    embed_dim: int = 16,
    n_filters: int = 8,
    pipeline: TextPipeline | None = None,
    n_classes: int | None = None,
) -> CnnModel:
    """Train with mini-batch Adam on the analytic gradients."""
    if embed_dim < 1 or n_filters < 1:
        raise ValueError("embed_dim and n_filters must be >= 1")
    if not train:
        raise ValueError("empty training set")
    if n_classes is None:
        n_classes = max(d.label for d in train) + 1
    if n_classes < 2:
        raise ValueError("training set must contain at least 2 classes")
    pipeline = resolve_pipeline(pipeline)

    ids_all, lengths_all = pad_id_batch([d.tokens for d in train], vocab,
                                        min_len=max(KERNEL_SIZES))
    y = np.array([d.label for d in train], dtype=np.int64)
    n = len(train)

    params = init_params(len(vocab), embed_dim, n_filters, n_classes, config.seed)
    adam = Adam(params, config.learning_rate)
    rng = np.random.default_rng(derive_seed(config.seed, "cnn-train"))

    history: list[float] = []
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        batch_losses: list[float] = []
        for b, start in enumerate(range(0, n, config.batch_size)):
            rows = perm[start : start + config.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = loss_and_grads(params, ids_all[rows], lengths_all[rows],
                                             y[rows])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch} batch {b}")
            adam.step(grads)
            params["embed"][0] = 0.0
            for name, value in params.items():
                if not np.all(np.isfinite(value)):
                    raise TrainingError(
                        f"non-finite values in {name!r} at epoch {epoch} batch {b}"
                    )
            batch_losses.append(loss)
        history.append(float(np.mean(batch_losses)))

    return CnnModel(params=params, vocab=vocab, pipeline=pipeline, n_classes=n_classes,
                    embed_dim=embed_dim, n_filters=n_filters, config=config,
                    loss_history=tuple(history))
