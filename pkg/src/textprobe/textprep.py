"""Text normalization, tokenization, stemming, vocabulary and class balancing.

The canonical preprocessing chain is::

    normalize -> tokenize -> stem -> remove_stopwords

All functions here are pure and deterministic, so the same raw text always
yields the same tokens no matter where or how often it is processed.
"""

from __future__ import annotations

import os
import re
import string
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from random import Random
from typing import Iterable, Sequence

from .errors import DataError

# ---------------------------------------------------------------------------
# Domain records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RawDoc:
    """A raw text with its 0-based class label."""

    text: str
    label: int


@dataclass(frozen=True)
class TokenizedDoc:
    """A document after preprocessing.

    ``tokens`` are lowercase, whitespace-free and reproducible: running the
    pipeline that produced them on ``raw`` again gives the same tokens.
    """

    raw: str
    tokens: tuple[str, ...]
    label: int


@dataclass(frozen=True)
class Vocabulary:
    """Dense token ids plus document-frequency counts.

    Ids are assigned by descending document frequency, ties broken
    lexicographically, so a vocabulary built twice from the same corpus is
    identical.
    """

    ids: dict[str, int] = field(default_factory=dict)
    doc_freq: dict[str, int] = field(default_factory=dict)
    n_docs: int = 0

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, token: str) -> bool:
        return token in self.ids

    def id_of(self, token: str) -> int | None:
        return self.ids.get(token)

    def tokens_in_id_order(self) -> list[str]:
        return sorted(self.ids, key=self.ids.__getitem__)


# ---------------------------------------------------------------------------
# Normalization and tokenization
# ---------------------------------------------------------------------------

_URL_RE = re.compile(r"(?:[a-z][a-z0-9+.\-]*://\S*|(?<!\S)www\.\S*)")
_MENTION_RE = re.compile(r"(?<!\S)@\S+")
_HASHTAG_RE = re.compile(r"(?<!\S)#\S+")
_PUNCT_CHARS = frozenset(string.punctuation)


def _is_punct(ch: str) -> bool:
    return ch in _PUNCT_CHARS or unicodedata.category(ch).startswith("P")


def normalize(text: str) -> str:
    """Lowercase and clean a raw text.

    URLs (``scheme://...`` or ``www....``), @-mentions and #-hashtags are
    dropped whole; any remaining punctuation characters are stripped and
    whitespace runs collapse to single spaces. The function is idempotent.
    """
    s = text.lower()
    s = _URL_RE.sub(" ", s)
    s = _MENTION_RE.sub(" ", s)
    s = _HASHTAG_RE.sub(" ", s)
    s = "".join(ch for ch in s if not _is_punct(ch))
    return " ".join(s.split())


def tokenize(text: str) -> list[str]:
    """Split a normalized text on whitespace; never yields empty tokens."""
    return text.split()


def remove_stopwords(tokens: Sequence[str], stoplist: frozenset[str] | set[str]) -> list[str]:
    """Order-preserving filter dropping tokens found in ``stoplist``."""
    return [t for t in tokens if t not in stoplist]


# ---------------------------------------------------------------------------
# Suffix-stripping stemmer (Porter's classic rule set, run to a fixpoint so
# that stem(stem(t)) == stem(t) holds for every token)
# ---------------------------------------------------------------------------

_VOWELS = "aeiou"


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        # y is a vowel when preceded by a consonant, a consonant otherwise
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of vowel-to-consonant transitions (the [C](VC)^m[V] count)."""
    m = 0
    prev_cons: bool | None = None
    for i in range(len(stem)):
        cons = _is_consonant(stem, i)
        if prev_cons is False and cons:
            m += 1
        prev_cons = cons
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(word: str) -> bool:
    # consonant-vowel-consonant, final consonant not w, x or y
    if len(word) < 3:
        return False
    return (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


# (suffix, replacement) tables for steps 2-4; longest suffix wins, and once a
# suffix matches no other rule in the step is tried.
_STEP2 = [
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
]
_STEP3 = [
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
]
_STEP4 = [
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment",
    "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
]

_STEP2.sort(key=lambda r: -len(r[0]))
_STEP3.sort(key=lambda r: -len(r[0]))
_STEP4.sort(key=len, reverse=True)


def _step1a(w: str) -> str:
    if w.endswith("sses"):
        return w[:-2]
    if w.endswith("ies"):
        return w[:-2]
    if w.endswith("ss"):
        return w
    if w.endswith("s"):
        return w[:-1]
    return w


def _step1b(w: str) -> str:
    if w.endswith("eed"):
        if _measure(w[:-3]) > 0:
            return w[:-1]
        return w
    stripped = False
    if w.endswith("ed") and _has_vowel(w[:-2]):
        w = w[:-2]
        stripped = True
    elif w.endswith("ing") and _has_vowel(w[:-3]):
        w = w[:-3]
        stripped = True
    if stripped:
        if w.endswith(("at", "bl", "iz")):
            w += "e"
        elif _ends_double_consonant(w) and w[-1] not in "lsz":
            w = w[:-1]
        elif _measure(w) == 1 and _ends_cvc(w):
            w += "e"
    return w


def _step1c(w: str) -> str:
    if w.endswith("y") and _has_vowel(w[:-1]):
        return w[:-1] + "i"
    return w


def _step2(w: str) -> str:
    for suffix, repl in _STEP2:
        if w.endswith(suffix):
            stem_part = w[: -len(suffix)]
            if _measure(stem_part) > 0:
                return stem_part + repl
            return w
    return w


def _step3(w: str) -> str:
    for suffix, repl in _STEP3:
        if w.endswith(suffix):
            stem_part = w[: -len(suffix)]
            if _measure(stem_part) > 0:
                return stem_part + repl
            return w
    return w


def _step4(w: str) -> str:
    for suffix in _STEP4:
        if w.endswith(suffix):
            stem_part = w[: -len(suffix)]
            if _measure(stem_part) > 1:
                if suffix == "ion" and not stem_part.endswith(("s", "t")):
                    return w
                return stem_part
            return w
    return w


def _step5(w: str) -> str:
    if w.endswith("e"):
        stem_part = w[:-1]
        m = _measure(stem_part)
        if m > 1 or (m == 1 and not _ends_cvc(stem_part)):
            w = stem_part
    if _measure(w) > 1 and _ends_double_consonant(w) and w.endswith("l"):
        w = w[:-1]
    return w


def _porter_pass(w: str) -> str:
    if len(w) <= 2:
        return w
    for step in (_step1a, _step1b, _step1c, _step2, _step3, _step4, _step5):
        w = step(w)
    return w


def stem(token: str) -> str:
    """Strip inflectional/derivational suffixes from a lowercase token.

    The rule passes are applied until the token stops changing, which makes
    the function idempotent. Tokens of length <= 2 are returned untouched.
    """
    w = token
    for _ in range(5):
        reduced = _porter_pass(w)
        if reduced == w:
            return w
        w = reduced
    return w


# ---------------------------------------------------------------------------
# Vocabulary and balancing
# ---------------------------------------------------------------------------


def build_vocab(
    corpus: Iterable[TokenizedDoc],
    min_df: int = 1,
    max_size: int | None = None,
) -> Vocabulary:
    """Build a vocabulary of tokens appearing in at least ``min_df`` documents.

    If more than ``max_size`` tokens qualify, the highest document-frequency
    tokens are kept (frequency ties broken lexicographically). Ids follow the
    same descending-frequency ordering.
    """
    if min_df < 1:
        raise ValueError("min_df must be >= 1")
    if max_size is not None and max_size < 1:
        raise ValueError("max_size must be >= 1")
    df: Counter[str] = Counter()
    n_docs = 0
    for doc in corpus:
        n_docs += 1
        df.update(set(doc.tokens))
    kept = [(tok, n) for tok, n in df.items() if n >= min_df]
    kept.sort(key=lambda item: (-item[1], item[0]))
    if max_size is not None:
        kept = kept[:max_size]
    ids = {tok: i for i, (tok, _) in enumerate(kept)}
    return Vocabulary(ids=ids, doc_freq={tok: n for tok, n in kept}, n_docs=n_docs)


def balance_classes(
    docs: Sequence[RawDoc], seed: int, n_classes: int | None = None
) -> list[RawDoc]:
    """Random undersampling to the minority-class count.

    Every class is reduced to the size of the smallest class by seeded
    sampling without replacement, and the result is shuffled with the same
    seed, so output is identical across runs and platforms.
    """
    if n_classes is None:
        n_classes = max((d.label for d in docs), default=-1) + 1
    by_class: dict[int, list[int]] = {c: [] for c in range(n_classes)}
    for i, doc in enumerate(docs):
        if doc.label not in by_class:
            raise DataError(f"label {doc.label} outside declared classes 0..{n_classes - 1}")
        by_class[doc.label].append(i)
    for c in range(n_classes):
        if not by_class[c]:
            raise DataError(f"class {c} empty")
    target = min(len(v) for v in by_class.values())
    rng = Random(seed)
    chosen: list[int] = []
    for c in range(n_classes):
        chosen.extend(sorted(rng.sample(by_class[c], target)))
    rng.shuffle(chosen)
    return [docs[i] for i in chosen]


# ---------------------------------------------------------------------------
# Pipeline and stopword assets
# ---------------------------------------------------------------------------

STOPWORDS_ENV_VAR = "TEXTPROBE_STOPWORDS"


def load_stopwords(path: str | os.PathLike | None = None) -> frozenset[str]:
    """Read a stopword file (one lowercase token per line, '#' comments).

    With ``path=None`` the bundled default list is used, unless the
    ``TEXTPROBE_STOPWORDS`` environment variable points elsewhere.
    """
    if path is None:
        env = os.environ.get(STOPWORDS_ENV_VAR)
        if env:
            path = env
        else:
            ref = resources.files("textprobe.assets").joinpath("stopwords.txt")
            return _parse_stopwords(ref.read_text(encoding="utf-8"))
    with open(path, encoding="utf-8") as fh:
        return _parse_stopwords(fh.read())


def _parse_stopwords(content: str) -> frozenset[str]:
    words = set()
    for line in content.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


@dataclass(frozen=True)
class TextPipeline:
    """The preprocessing chain applied both at training and prediction time."""

    stopwords: frozenset[str] = frozenset()
    use_stemmer: bool = True

    def __call__(self, text: str) -> list[str]:
        tokens = tokenize(normalize(text))
        if self.use_stemmer:
            tokens = [stem(t) for t in tokens]
        return remove_stopwords(tokens, self.stopwords)

    def tokenize_doc(self, doc: RawDoc) -> TokenizedDoc:
        return TokenizedDoc(raw=doc.text, tokens=tuple(self(doc.text)), label=doc.label)

    def tokenize_corpus(self, docs: Iterable[RawDoc]) -> list[TokenizedDoc]:
        return [self.tokenize_doc(d) for d in docs]


def default_pipeline() -> TextPipeline:
    """Pipeline with the bundled stopword list and stemming enabled."""
    return TextPipeline(stopwords=load_stopwords(), use_stemmer=True)
