"""Dataset loading, train/test splitting, and bundled synthetic fixtures.

Two CSV schemas are supported: a three-class file (integer class column plus
a tweet-text column) and a binary file (continuous hate-speech score in
[0, 1] plus a text column, thresholded at 0.5 with ties mapping to the
negative class). Column names are configurable; the defaults follow the
public releases of the corresponding datasets.

Because the full public datasets cannot ship with the package, a seeded
synthetic generator produces fixture corpora with the same schemas. The
small CSVs under ``textprobe/assets`` are frozen outputs of that generator.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from random import Random
from typing import Iterable, Sequence

from .errors import DataError
from .textprep import RawDoc

MULTICLASS_CLASS_NAMES = ("Hate speech", "Offensive language", "Neutral")
BINARY_CLASS_NAMES = ("Not hate speech", "Hate speech")


@dataclass(frozen=True)
class DatasetSpec:
    """Identifies a dataset file and its labeling scheme."""

    name: str
    task: str  # "multiclass3" or "binary"
    class_names: tuple[str, ...]
    path: str

    def __post_init__(self):
        if self.task == "multiclass3":
            expected = MULTICLASS_CLASS_NAMES
        elif self.task == "binary":
            expected = BINARY_CLASS_NAMES
        else:
            raise ValueError(f"unknown task {self.task!r}")
        if tuple(self.class_names) != expected:
            raise ValueError(f"task {self.task!r} requires classes {expected}")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


def multiclass_spec(path: str | os.PathLike, name: str = "multiclass") -> DatasetSpec:
    return DatasetSpec(name=name, task="multiclass3",
                       class_names=MULTICLASS_CLASS_NAMES, path=str(path))


def binary_spec(path: str | os.PathLike, name: str = "binary") -> DatasetSpec:
    return DatasetSpec(name=name, task="binary",
                       class_names=BINARY_CLASS_NAMES, path=str(path))


# ---------------------------------------------------------------------------
# CSV loaders
# ---------------------------------------------------------------------------


def _open_reader(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        row = raw[: exc.start].count(b"\n") + 1
        raise DataError(f"{path}: row {row}: not valid UTF-8") from exc
    reader = csv.DictReader(io.StringIO(text, newline=""))
    if reader.fieldnames is None:
        raise DataError(f"{path}: empty file, no header row")
    return reader


def _require_columns(path, reader, columns):
    for col in columns:
        if col not in reader.fieldnames:
            raise DataError(f"{path}: missing column {col!r} (found {reader.fieldnames})")


def load_multiclass_csv(
    path: str | os.PathLike,
    class_col: str = "class",
    text_col: str = "tweet",
) -> list[RawDoc]:
    """Load the three-class schema; one RawDoc per row, labels taken verbatim.

    Rows are never reordered or deduplicated. Parse problems raise
    :class:`DataError` naming the offending file row.
    """
    reader = _open_reader(path)
    _require_columns(path, reader, (class_col, text_col))
    docs: list[RawDoc] = []
    for row in reader:
        raw = row[class_col]
        try:
            label = int(raw)
        except (TypeError, ValueError):
            raise DataError(
                f"{path}: row {reader.line_num}: cannot parse class value {raw!r}"
            ) from None
        if label < 0:
            raise DataError(f"{path}: row {reader.line_num}: negative class {label}")
        docs.append(RawDoc(text=row[text_col] or "", label=label))
    return docs


def load_binary_csv(
    path: str | os.PathLike,
    score_col: str = "hate_speech_score",
    text_col: str = "text",
    threshold: float = 0.5,
    aggregate: str = "row",
    comment_id_col: str = "comment_id",
) -> list[RawDoc]:
    """Load the binary schema; label 1 iff score strictly exceeds ``threshold``.

    A score equal to the threshold maps to label 0. ``aggregate="row"``
    thresholds every row independently; ``aggregate="mean"`` first averages
    scores per ``comment_id_col`` value (one RawDoc per comment, first text
    wins).
    """
    if aggregate not in ("row", "mean"):
        raise ValueError("aggregate must be 'row' or 'mean'")
    reader = _open_reader(path)
    cols = [score_col, text_col]
    if aggregate == "mean":
        cols.append(comment_id_col)
    _require_columns(path, reader, cols)
    rows: list[tuple[str, float, str]] = []
    for row in reader:
        raw = row[score_col]
        try:
            score = float(raw)
        except (TypeError, ValueError):
            raise DataError(
                f"{path}: row {reader.line_num}: cannot parse score {raw!r}"
            ) from None
        if not math.isfinite(score):
            raise DataError(f"{path}: row {reader.line_num}: non-finite score {raw!r}")
        key = row[comment_id_col] if aggregate == "mean" else ""
        rows.append((key, score, row[text_col] or ""))

    if aggregate == "row":
        return [RawDoc(text=text, label=int(score > threshold)) for _, score, text in rows]

    order: list[str] = []
    scores: dict[str, list[float]] = {}
    texts: dict[str, str] = {}
    for key, score, text in rows:
        if key not in scores:
            order.append(key)
            scores[key] = []
            texts[key] = text
        scores[key].append(score)
    return [
        RawDoc(text=texts[k], label=int(math.fsum(scores[k]) / len(scores[k]) > threshold))
        for k in order
    ]


# ---------------------------------------------------------------------------
# Stratified splitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Split:
    train: tuple[RawDoc, ...]
    test: tuple[RawDoc, ...]
    seed: int
    test_fraction: float


def stratified_split(docs: Sequence[RawDoc], test_fraction: float, seed: int) -> Split:
    """Seeded per-class shuffle followed by a proportional cut.

    Deterministic for a fixed document order and seed; the train and test
    parts keep the original relative document order.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    by_class: dict[int, list[int]] = {}
    for i, doc in enumerate(docs):
        by_class.setdefault(doc.label, []).append(i)
    for c, idxs in sorted(by_class.items()):
        if len(idxs) < 2:
            raise DataError(f"class {c} has fewer than 2 documents; cannot split")
    rng = Random(seed)
    test_idx: set[int] = set()
    for c in sorted(by_class):
        idxs = list(by_class[c])
        rng.shuffle(idxs)
        n_test = round(len(idxs) * test_fraction)
        test_idx.update(idxs[:n_test])
    train = tuple(docs[i] for i in range(len(docs)) if i not in test_idx)
    test = tuple(docs[i] for i in sorted(test_idx))
    return Split(train=train, test=test, seed=seed, test_fraction=test_fraction)


# ---------------------------------------------------------------------------
# Synthetic fixture corpora
# ---------------------------------------------------------------------------

# Token pools for the generator. Class-indicative words come with optional
# inflected variants so that stemming has real work to do. None of the strong
# words is an actual slur; they are stand-ins with the right register.
_HATE_WORDS = [
    ("vermin", ["vermin"]),
    ("scum", ["scum"]),
    ("subhuman", ["subhuman", "subhumans"]),
    ("filth", ["filth", "filthy"]),
    ("maggot", ["maggot", "maggots"]),
    ("parasite", ["parasite", "parasites"]),
    ("cockroach", ["cockroach", "cockroaches"]),
    ("exterminate", ["exterminate", "exterminated", "exterminating"]),
    ("deport", ["deport", "deported", "deporting"]),
    ("eradicate", ["eradicate", "eradicated"]),
]
_OFFENSIVE_WORDS = [
    ("idiot", ["idiot", "idiots", "idiotic"]),
    ("stupid", ["stupid"]),
    ("moron", ["moron", "morons", "moronic"]),
    ("loser", ["loser", "losers"]),
    ("trash", ["trash", "trashy"]),
    ("pathetic", ["pathetic"]),
    ("clown", ["clown", "clowns"]),
    ("dumb", ["dumb", "dumber"]),
    ("fool", ["fool", "fools", "foolish"]),
    ("jerk", ["jerk", "jerks"]),
]
_NEUTRAL_WORDS = [
    ("weather", ["weather"]),
    ("coffee", ["coffee"]),
    ("music", ["music"]),
    ("garden", ["garden", "gardens", "gardening"]),
    ("recipe", ["recipe", "recipes"]),
    ("sunset", ["sunset", "sunsets"]),
    ("practice", ["practice", "practicing"]),
    ("weekend", ["weekend", "weekends"]),
    ("library", ["library", "libraries"]),
    ("picnic", ["picnic", "picnics"]),
    ("concert", ["concert", "concerts"]),
    ("holiday", ["holiday", "holidays"]),
]
_FILLER = [
    "people", "person", "folks", "friend", "city", "team", "game", "today",
    "tomorrow", "really", "totally", "think", "know", "want", "going",
    "watch", "made", "nice", "time", "work", "home", "street", "everyone",
    "never", "always", "still", "right", "plan", "story", "phone", "lunch",
    "dinner", "group", "photo", "play", "walk", "read", "write", "keep",
    "feel", "look", "good", "great", "new", "old", "long", "short", "day",
    "night", "week", "year", "talk", "start", "stop", "place", "thing",
    "kind", "word", "crowd", "corner",
]
_HASHTAGS = ["#monday", "#news", "#life", "#nyc", "#trending", "#latest"]

_CLASS_POOLS = {0: _HATE_WORDS, 1: _OFFENSIVE_WORDS, 2: _NEUTRAL_WORDS}


def _pick_variant(rng: Random, pool) -> str:
    _, variants = pool[rng.randrange(len(pool))]
    return variants[rng.randrange(len(variants))]


def _decorate(rng: Random, words: list[str]) -> str:
    """Turn a token list into a raw tweet-like string."""
    words = list(words)
    if rng.random() < 0.5:
        i = rng.randrange(len(words))
        words[i] = words[i].upper() if rng.random() < 0.3 else words[i].capitalize()
    if rng.random() < 0.25:
        words.insert(0, f"@user{rng.randrange(1000)}")
    if rng.random() < 0.10:
        words.insert(rng.randrange(len(words) + 1), f"http://t.co/x{rng.randrange(100)}")
    if rng.random() < 0.20:
        words.append(_HASHTAGS[rng.randrange(len(_HASHTAGS))])
    text = " ".join(words)
    if rng.random() < 0.35:
        text += rng.choice(["!", "!!", "...", "?", "!?"])
    return text


def _synthetic_tokens(rng: Random, label: int, signal_p: float,
                      contamination_p: float) -> list[str]:
    length = rng.randint(5, 10)
    words = [_FILLER[rng.randrange(len(_FILLER))] for _ in range(length)]
    if rng.random() < signal_p:
        n_signal = 2 if rng.random() < 0.35 else 1
        for _ in range(n_signal):
            pos = rng.randrange(len(words))
            words[pos] = _pick_variant(rng, _CLASS_POOLS[label])
    if rng.random() < contamination_p:
        other = [c for c in _CLASS_POOLS if c != label][rng.randrange(2)]
        pos = rng.randrange(len(words))
        words[pos] = _pick_variant(rng, _CLASS_POOLS[other])
    return words


def synthetic_multiclass(
    n: int,
    seed: int,
    signal_p: float = 0.93,
    contamination_p: float = 0.12,
    label_noise: float = 0.03,
    long_p: float = 0.03,
) -> list[RawDoc]:
    """Generate a seeded three-class corpus with the multiclass schema.

    Each document is filler text carrying (usually) one or two
    class-indicative words; contamination and label noise keep the task from
    being trivially separable. A small fraction of documents is padded past
    100 characters so attack length gating has something to skip.
    """
    rng = Random(seed)
    docs: list[RawDoc] = []
    for i in range(n):
        label = i % 3
        words = _synthetic_tokens(rng, label, signal_p, contamination_p)
        if rng.random() < long_p:
            while len(" ".join(words)) <= 110:
                words.append(_FILLER[rng.randrange(len(_FILLER))])
        text = _decorate(rng, words)
        out_label = label
        if rng.random() < label_noise:
            out_label = (label + 1 + rng.randrange(2)) % 3
        docs.append(RawDoc(text=text, label=out_label))
    return docs


def synthetic_binary_rows(
    n: int,
    seed: int,
    signal_p: float = 0.93,
    contamination_p: float = 0.10,
) -> list[tuple[float, str]]:
    """Generate (score, text) rows with the binary schema; score > 0.5 is hate."""
    rng = Random(seed)
    rows: list[tuple[float, str]] = []
    for i in range(n):
        hateful = i % 2 == 1
        pool_label = 0 if hateful else 2
        words = _synthetic_tokens(rng, pool_label, signal_p, contamination_p)
        text = _decorate(rng, words)
        if hateful:
            score = round(0.51 + rng.random() * 0.48, 4)
        else:
            score = round(rng.random() * 0.49, 4)
        rows.append((score, text))
    return rows


def synthetic_binary(n: int, seed: int) -> list[RawDoc]:
    return [RawDoc(text=text, label=int(score > 0.5))
            for score, text in synthetic_binary_rows(n, seed)]


def write_multiclass_csv(path: str | os.PathLike, docs: Iterable[RawDoc]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "tweet"])
        for doc in docs:
            writer.writerow([doc.label, doc.text])


def write_binary_csv(path: str | os.PathLike, rows: Iterable[tuple[float, str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["comment_id", "hate_speech_score", "text"])
        for i, (score, text) in enumerate(rows):
            writer.writerow([i, score, text])


def fixture_path(name: str) -> str:
    """Path of a bundled fixture CSV (``multiclass`` or ``binary``)."""
    from importlib import resources

    ref = resources.files("textprobe.assets").joinpath(f"fixture_{name}.csv")
    return str(ref)
