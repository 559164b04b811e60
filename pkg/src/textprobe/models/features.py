"""Token lists to numeric features.

Bag-of-words uses raw occurrence counts; tokens outside the vocabulary are
dropped. Sequence encoding reserves id 0 for padding and unknown tokens
(vocabulary id v maps to sequence id v + 1).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..textprep import Vocabulary

PAD_ID = 0


def bow_vector(tokens: Sequence[str], vocab: Vocabulary) -> np.ndarray:
    vec = np.zeros(len(vocab), dtype=np.float64)
    for tok in tokens:
        idx = vocab.id_of(tok)
        if idx is not None:
            vec[idx] += 1.0
    return vec


def bow_matrix(token_lists: Sequence[Sequence[str]], vocab: Vocabulary) -> np.ndarray:
    mat = np.zeros((len(token_lists), len(vocab)), dtype=np.float64)
    for i, tokens in enumerate(token_lists):
        for tok in tokens:
            idx = vocab.id_of(tok)
            if idx is not None:
                mat[i, idx] += 1.0
    return mat


def id_sequence(tokens: Sequence[str], vocab: Vocabulary) -> list[int]:
    out = []
    for tok in tokens:
        idx = vocab.id_of(tok)
        out.append(PAD_ID if idx is None else idx + 1)
    return out


def pad_id_batch(
    token_lists: Sequence[Sequence[str]], vocab: Vocabulary, min_len: int
) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad id sequences into a (batch, max_len) matrix.

    Returns the id matrix and the true (unpadded) lengths. ``min_len`` keeps
    short batches wide enough for the largest convolution kernel.
    """
    seqs = [id_sequence(t, vocab) for t in token_lists]
    lengths = np.array([len(s) for s in seqs], dtype=np.int64)
    width = max(min_len, int(lengths.max()) if len(seqs) else min_len)
    ids = np.full((len(seqs), width), PAD_ID, dtype=np.int64)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
    return ids, lengths
