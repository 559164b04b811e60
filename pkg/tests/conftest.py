"""Shared fixtures: a desk-scale synthetic corpus and models trained on it."""

from __future__ import annotations

import pytest

from textprobe.data import stratified_split, synthetic_multiclass
from textprobe.models import TrainConfig, train_forest, train_logistic
from textprobe.seeding import derive_seed
from textprobe.textprep import balance_classes, build_vocab, default_pipeline

DESK_SEED = 7


@pytest.fixture(scope="session")
def desk_corpus():
    """Balanced, split, tokenized 6000-document synthetic corpus."""
    docs = synthetic_multiclass(6000, seed=11)
    docs = balance_classes(docs, derive_seed(DESK_SEED, "balance"), n_classes=3)
    split = stratified_split(docs, 0.2, derive_seed(DESK_SEED, "split"))
    pipeline = default_pipeline()
    train_tok = pipeline.tokenize_corpus(split.train)
    test_tok = [d for d in pipeline.tokenize_corpus(split.test) if d.tokens]
    vocab = build_vocab(train_tok, min_df=2, max_size=20000)
    return {
        "pipeline": pipeline,
        "train": train_tok,
        "test": test_tok,
        "vocab": vocab,
    }


@pytest.fixture(scope="session")
def desk_logistic(desk_corpus):
    config = TrainConfig(learning_rate=0.05, epochs=10, batch_size=64, seed=3)
    return train_logistic(desk_corpus["train"], desk_corpus["vocab"], config,
                          pipeline=desk_corpus["pipeline"])


@pytest.fixture(scope="session")
def desk_forest(desk_corpus):
    return train_forest(desk_corpus["train"], desk_corpus["vocab"], n_trees=10,
                        seed=derive_seed(DESK_SEED, "train", "forest"),
                        pipeline=desk_corpus["pipeline"])
