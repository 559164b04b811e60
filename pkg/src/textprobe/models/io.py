"""Versioned binary container for trained models.

Layout (all integers little-endian):

    bytes 0-3   magic ``TXPM``
    bytes 4-7   container version (uint32)
    bytes 8-15  header length in bytes (uint64)
    header      UTF-8 JSON: kind, classes, pipeline, vocabulary, hyperparams,
                and an ordered array manifest (name, shape, dtype)
    payload     raw array bytes in manifest order; float64/int64 little-endian

Arrays round-trip bit-exactly, so a loaded model reproduces the original
model's predictions down to the last bit.
"""

from __future__ import annotations

import json
import os
from typing import Sequence

import numpy as np

from ..errors import ModelFormatError
from ..textprep import TextPipeline, Vocabulary
from .cnn import CnnModel
from .forest import ForestModel, Tree
from .logistic import LogisticModel

MAGIC = b"TXPM"
VERSION = 1

_DTYPES = {"<f8": np.dtype("<f8"), "<i8": np.dtype("<i8")}


def _pipeline_to_json(pipeline: TextPipeline) -> dict:
    return {"stopwords": sorted(pipeline.stopwords), "use_stemmer": pipeline.use_stemmer}


def _pipeline_from_json(obj: dict) -> TextPipeline:
    return TextPipeline(stopwords=frozenset(obj["stopwords"]),
                        use_stemmer=bool(obj["use_stemmer"]))


def _vocab_to_json(vocab: Vocabulary) -> dict:
    tokens = vocab.tokens_in_id_order()
    return {
        "tokens": tokens,
        "doc_freq": [vocab.doc_freq[t] for t in tokens],
        "n_docs": vocab.n_docs,
    }


def _vocab_from_json(obj: dict) -> Vocabulary:
    tokens = obj["tokens"]
    return Vocabulary(
        ids={t: i for i, t in enumerate(tokens)},
        doc_freq=dict(zip(tokens, obj["doc_freq"])),
        n_docs=int(obj["n_docs"]),
    )


def _model_parts(model) -> tuple[dict, dict[str, np.ndarray]]:
    if isinstance(model, ForestModel):
        hyper = {"n_trees": model.n_trees, "seed": model.seed,
                 "min_leaf": model.min_leaf, "max_depth": model.max_depth}
        arrays: dict[str, np.ndarray] = {}
        for i, tree in enumerate(model.trees):
            arrays[f"tree{i}/feature"] = tree.feature
            arrays[f"tree{i}/threshold"] = tree.threshold
            arrays[f"tree{i}/left"] = tree.left
            arrays[f"tree{i}/right"] = tree.right
            arrays[f"tree{i}/probs"] = tree.probs
        return hyper, arrays
    if isinstance(model, LogisticModel):
        hyper = {"loss_history": list(model.loss_history)}
        return hyper, {"coef": model.coef, "bias": model.bias}
    if isinstance(model, CnnModel):
        hyper = {
            "embed_dim": model.embed_dim,
            "n_filters": model.n_filters,
            "loss_history": list(model.loss_history),
        }
        return hyper, dict(model.params)
    raise ModelFormatError(f"cannot serialize model of type {type(model).__name__}")


def save_model(model, path: str | os.PathLike) -> None:
    hyper, arrays = _model_parts(model)
    manifest = []
    for name, arr in arrays.items():
        if arr.dtype.kind == "f":
            dtype = "<f8"
        elif arr.dtype.kind == "i":
            dtype = "<i8"
        else:
            raise ModelFormatError(f"unsupported array dtype {arr.dtype} for {name!r}")
        manifest.append({"name": name, "shape": list(arr.shape), "dtype": dtype})
    header = {
        "kind": model.kind,
        "n_classes": model.n_classes,
        "pipeline": _pipeline_to_json(model.pipeline),
        "vocab": _vocab_to_json(model.vocab),
        "hyper": hyper,
        "arrays": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(VERSION.to_bytes(4, "little"))
        fh.write(len(header_bytes).to_bytes(8, "little"))
        fh.write(header_bytes)
        for entry in manifest:
            arr = np.ascontiguousarray(arrays[entry["name"]].astype(_DTYPES[entry["dtype"]]))
            fh.write(arr.tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ModelFormatError(f"truncated model file while reading {what}")
    return data


def load_model(path: str | os.PathLike, expected_kind: str | None = None):
    """Load any saved model; raises ModelFormatError on corruption or mismatch."""
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic bytes") != MAGIC:
            raise ModelFormatError(f"{path}: not a model file")
        version = int.from_bytes(_read_exact(fh, 4, "version"), "little")
        if version != VERSION:
            raise ModelFormatError(f"{path}: unsupported container version {version}")
        header_len = int.from_bytes(_read_exact(fh, 8, "header length"), "little")
        try:
            header = json.loads(_read_exact(fh, header_len, "header").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelFormatError(f"{path}: corrupt header") from exc
        kind = header.get("kind")
        if expected_kind is not None and kind != expected_kind:
            raise ModelFormatError(
                f"{path}: model kind is {kind!r}, expected {expected_kind!r}"
            )
        arrays: dict[str, np.ndarray] = {}
        for entry in header["arrays"]:
            dtype = _DTYPES.get(entry["dtype"])
            if dtype is None:
                raise ModelFormatError(f"{path}: unknown dtype {entry['dtype']!r}")
            shape = tuple(int(s) for s in entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = _read_exact(fh, count * dtype.itemsize, f"array {entry['name']!r}")
            arrays[entry["name"]] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()

    vocab = _vocab_from_json(header["vocab"])
    pipeline = _pipeline_from_json(header["pipeline"])
    n_classes = int(header["n_classes"])
    hyper = header["hyper"]

    if kind == "forest":
        trees = []
        for i in range(int(hyper["n_trees"])):
            trees.append(Tree(
                feature=arrays[f"tree{i}/feature"],
                threshold=arrays[f"tree{i}/threshold"],
                left=arrays[f"tree{i}/left"],
                right=arrays[f"tree{i}/right"],
                probs=arrays[f"tree{i}/probs"],
            ))
        return ForestModel(trees=trees, vocab=vocab, pipeline=pipeline,
                           n_classes=n_classes, seed=int(hyper["seed"]),
                           min_leaf=int(hyper["min_leaf"]),
                           max_depth=hyper["max_depth"])
    if kind == "logistic":
        return LogisticModel(coef=arrays["coef"], bias=arrays["bias"], vocab=vocab,
                             pipeline=pipeline,
                             loss_history=tuple(hyper.get("loss_history", ())))
    if kind == "cnn":
        params = {k: v for k, v in arrays.items()}
        return CnnModel(params=params, vocab=vocab, pipeline=pipeline,
                        n_classes=n_classes, embed_dim=int(hyper["embed_dim"]),
                        n_filters=int(hyper["n_filters"]),
                        loss_history=tuple(hyper.get("loss_history", ())))
    raise ModelFormatError(f"{path}: unknown model kind {kind!r}")
