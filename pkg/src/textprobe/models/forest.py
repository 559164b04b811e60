"""Random forest of Gini decision trees over bag-of-words counts.

Each tree is grown on a seeded bootstrap sample. At every node a seeded
permutation of the features is scanned and the first max(1, floor(sqrt(V)))
features that actually vary inside the node are evaluated for the best
Gini-weighted split; nodes stop at purity or at ``min_leaf`` samples.
Prediction averages the leaf class distributions across trees.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..seeding import derive_seed
from ..textprep import TextPipeline, TokenizedDoc, Vocabulary
from .base import ProbClassifier, resolve_pipeline
from .features import bow_matrix


@dataclass
class Tree:
    """Array-encoded binary tree; feature == -1 marks a leaf."""

    feature: np.ndarray  # (n_nodes,) int64
    threshold: np.ndarray  # (n_nodes,) float64
    left: np.ndarray  # (n_nodes,) int64
    right: np.ndarray  # (n_nodes,) int64
    probs: np.ndarray  # (n_nodes, classes) float64, class distribution at node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = np.nonzero(feat >= 0)[0]
            if active.size == 0:
                break
            cur = node[active]
            go_left = X[active, feat[active]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return self.probs[node]


class _TreeBuilder:
    def __init__(self, X, y, n_classes, rng, min_leaf, max_depth):
        self.X = X
        self.y = y
        self.n_classes = n_classes
        self.rng = rng
        self.min_leaf = min_leaf
        self.max_depth = max_depth
        self.n_candidates = max(1, int(np.sqrt(X.shape[1]))) if X.shape[1] else 0
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.probs: list[np.ndarray] = []

    def _new_node(self, counts: np.ndarray) -> int:
        self.feature.append(-1)
        self.threshold.append(np.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.probs.append(counts / counts.sum())
        return len(self.feature) - 1

    def build(self, idx: np.ndarray) -> int:
        # Iterative preorder construction (left subtree first), so node and
        # rng-draw order match a depth-first recursion without its depth limit.
        stack: list[tuple[np.ndarray, int, int, bool]] = [(idx, 0, -1, False)]
        root = -1
        while stack:
            node_idx, depth, parent, is_left = stack.pop()
            labels = self.y[node_idx]
            counts = np.bincount(labels, minlength=self.n_classes).astype(np.float64)
            node = self._new_node(counts)
            if parent < 0:
                root = node
            elif is_left:
                self.left[parent] = node
            else:
                self.right[parent] = node
            if (
                counts.max() == node_idx.size
                or node_idx.size <= self.min_leaf
                or (self.max_depth is not None and depth >= self.max_depth)
            ):
                continue
            split = self._best_split(node_idx, labels, counts)
            if split is None:
                continue
            f, thr = split
            go_left = self.X[node_idx, f] <= thr
            self.feature[node] = f
            self.threshold[node] = thr
            stack.append((node_idx[~go_left], depth + 1, node, False))
            stack.append((node_idx[go_left], depth + 1, node, True))
        return root

    def _best_split(self, idx, labels, counts):
        n = idx.size
        best_score = np.inf
        best = None
        evaluated = 0
        for f in self.rng.permutation(self.X.shape[1]):
            x = self.X[idx, f]
            order = np.argsort(x, kind="stable")
            xs = x[order]
            if xs[0] == xs[-1]:
                continue  # constant inside the node; does not count as a candidate
            evaluated += 1
            ys = labels[order]
            onehot = np.zeros((n, self.n_classes), dtype=np.float64)
            onehot[np.arange(n), ys] = 1.0
            cum = np.cumsum(onehot, axis=0)
            cut = np.nonzero(xs[:-1] != xs[1:])[0]
            n_left = (cut + 1).astype(np.float64)
            n_right = n - n_left
            c_left = cum[cut]
            c_right = counts - c_left
            gini_left = 1.0 - ((c_left / n_left[:, None]) ** 2).sum(axis=1)
            gini_right = 1.0 - ((c_right / n_right[:, None]) ** 2).sum(axis=1)
            weighted = (n_left * gini_left + n_right * gini_right) / n
            j = int(np.argmin(weighted))
            if weighted[j] < best_score:
                best_score = float(weighted[j])
                best = (int(f), float((xs[cut[j]] + xs[cut[j] + 1]) / 2.0))
            if evaluated >= self.n_candidates:
                break
        return best

    def as_tree(self) -> Tree:
        return Tree(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            probs=np.array(self.probs, dtype=np.float64),
        )


class ForestModel(ProbClassifier):
    kind = "forest"

    def __init__(
        self,
        trees: list[Tree],
        vocab: Vocabulary,
        pipeline: TextPipeline,
        n_classes: int,
        seed: int = 0,
        min_leaf: int = 2,
        max_depth: int | None = None,
    ):
        super().__init__(n_classes=n_classes, vocab=vocab, pipeline=pipeline)
        self.trees = trees
        self.seed = seed
        self.min_leaf = min_leaf
        self.max_depth = max_depth

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        X = bow_matrix(self._tokenize_batch(texts), self.vocab)
        acc = np.zeros((X.shape[0], self.n_classes), dtype=np.float64)
        for tree in self.trees:
            acc += tree.predict_proba(X)
        return acc / len(self.trees)


def train_forest(
    train: Sequence[TokenizedDoc],
    vocab: Vocabulary,
    n_trees: int = 10,
    seed: int = 0,
    pipeline: TextPipeline | None = None,
    min_leaf: int = 2,
    max_depth: int | None = None,
    n_classes: int | None = None,
) -> ForestModel:
    """Grow ``n_trees`` Gini trees on seeded bootstrap samples."""
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if not train:
        raise ValueError("empty training set")
    if n_classes is None:
        n_classes = max(d.label for d in train) + 1
    labels = {d.label for d in train}
    if len(labels) < 2:
        raise ValueError("training set must contain at least 2 classes")
    pipeline = resolve_pipeline(pipeline)

    X = bow_matrix([d.tokens for d in train], vocab)
    y = np.array([d.label for d in train], dtype=np.int64)
    n = len(train)

    trees: list[Tree] = []
    for t in range(n_trees):
        rng = np.random.default_rng(derive_seed(seed, "tree", t))
        bootstrap = rng.integers(0, n, size=n)
        builder = _TreeBuilder(X, y, n_classes, rng, min_leaf, max_depth)
        builder.build(bootstrap)
        trees.append(builder.as_tree())
    return ForestModel(trees=trees, vocab=vocab, pipeline=pipeline,
                       n_classes=n_classes, seed=seed, min_leaf=min_leaf,
                       max_depth=max_depth)
