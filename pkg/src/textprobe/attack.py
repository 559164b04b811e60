"""Explanation-guided black-box adversarial attacks.

Words are attacked in order of absolute explanation score. Candidate
replacements come from a thesaurus and from single-character typos; the
greedy search commits whichever candidate most reduces the probability of
the originally predicted class and declares success as soon as the argmax
flips. Outcomes are Successful, Failed, or Skipped (too long, nothing to
try, or already misclassified).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .lime import Explanation, LimeConfig, explain
from .seeding import derive_seed
from .textprep import TokenizedDoc

SUCCESSFUL = "successful"
FAILED = "failed"
SKIPPED = "skipped"

SKIP_TOO_LONG = "too_long"
SKIP_NO_CANDIDATES = "no_candidates"
SKIP_ALREADY_MISCLASSIFIED = "already_misclassified"
SKIP_ERROR = "error"

TRANSFORM_SYNONYM = "synonym"
TRANSFORM_CHAR_INSERT = "char_insert"
TRANSFORM_CHAR_DELETE = "char_delete"
_ALL_TRANSFORMS = (TRANSFORM_SYNONYM, TRANSFORM_CHAR_INSERT, TRANSFORM_CHAR_DELETE)

THESAURUS_ENV_VAR = "TEXTPROBE_THESAURUS"


# ---------------------------------------------------------------------------
# Thesaurus
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Thesaurus:
    """Word to ordered synonym list; no word maps to itself."""

    entries: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def synonyms(self, word: str) -> tuple[str, ...]:
        return self.entries.get(word, ())

    def __len__(self) -> int:
        return len(self.entries)


def make_thesaurus(mapping: dict[str, Sequence[str]]) -> Thesaurus:
    entries: dict[str, tuple[str, ...]] = {}
    for word, syns in mapping.items():
        seen: list[str] = []
        for syn in syns:
            if syn != word and syn not in seen:
                seen.append(syn)
        if seen:
            entries[word] = tuple(seen)
    return Thesaurus(entries=entries)


def load_thesaurus(path: str | os.PathLike | None = None) -> Thesaurus:
    """Read ``word<TAB>syn1,syn2,...`` lines (UTF-8, '#' comments allowed).

    With ``path=None`` the bundled default file is used unless the
    ``TEXTPROBE_THESAURUS`` environment variable points elsewhere.
    """
    if path is None:
        env = os.environ.get(THESAURUS_ENV_VAR)
        if env:
            path = env
        else:
            from importlib import resources

            ref = resources.files("textprobe.assets").joinpath("thesaurus.tsv")
            return _parse_thesaurus(ref.read_text(encoding="utf-8"), "thesaurus.tsv")
    with open(path, encoding="utf-8") as fh:
        return _parse_thesaurus(fh.read(), str(path))


def _parse_thesaurus(content: str, origin: str) -> Thesaurus:
    mapping: dict[str, list[str]] = {}
    for lineno, line in enumerate(content.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "\t" not in line:
            raise DataError(f"{origin}: line {lineno}: expected 'word<TAB>syn1,syn2,...'")
        word, _, rest = line.partition("\t")
        word = word.strip().lower()
        if not word:
            raise DataError(f"{origin}: line {lineno}: empty word")
        syns = [s.strip().lower() for s in rest.split(",") if s.strip()]
        for token in [word] + syns:
            if any(ch.isspace() for ch in token):
                raise DataError(f"{origin}: line {lineno}: multi-word entry {token!r}")
        mapping.setdefault(word, []).extend(syns)
    return make_thesaurus(mapping)


# ---------------------------------------------------------------------------
# Configuration and outcomes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttackConfig:
    transforms: tuple[str, ...] = _ALL_TRANSFORMS
    max_words_fraction: float = 0.3
    max_candidates_per_word: int = 10
    max_input_chars: int = 100
    seed: int = 0

    def __post_init__(self):
        if not self.transforms:
            raise ValueError("at least one transform must be enabled")
        for t in self.transforms:
            if t not in _ALL_TRANSFORMS:
                raise ValueError(f"unknown transform {t!r}")
        if not 0.0 < self.max_words_fraction <= 1.0:
            raise ValueError("max_words_fraction must be in (0, 1]")
        if self.max_candidates_per_word < 1:
            raise ValueError("max_candidates_per_word must be >= 1")


@dataclass(frozen=True)
class AttackOutcome:
    """Result of attacking one document.

    ``original_text`` is the canonical (token-joined) form the search
    perturbs; ``raw_text`` preserves the unprocessed input for reporting.
    Probability vectors are stored as tuples so records serialize cleanly.
    """

    kind: str
    label: int
    raw_text: str
    original_text: str
    perturbed_text: str | None = None
    original_probs: tuple[float, ...] | None = None
    perturbed_probs: tuple[float, ...] | None = None
    modified_positions: tuple[int, ...] = ()
    skip_reason: str | None = None
    diagnostic: str | None = None

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "label": self.label,
            "raw_text": self.raw_text,
            "original_text": self.original_text,
            "perturbed_text": self.perturbed_text,
            "original_probs": list(self.original_probs) if self.original_probs else None,
            "perturbed_probs": list(self.perturbed_probs) if self.perturbed_probs else None,
            "modified_positions": list(self.modified_positions),
            "skip_reason": self.skip_reason,
            "diagnostic": self.diagnostic,
        }


def outcome_from_record(record: dict) -> AttackOutcome:
    def _probs(value):
        return tuple(float(x) for x in value) if value is not None else None

    return AttackOutcome(
        kind=record["kind"],
        label=int(record["label"]),
        raw_text=record["raw_text"],
        original_text=record["original_text"],
        perturbed_text=record["perturbed_text"],
        original_probs=_probs(record["original_probs"]),
        perturbed_probs=_probs(record["perturbed_probs"]),
        modified_positions=tuple(int(p) for p in record["modified_positions"]),
        skip_reason=record["skip_reason"],
        diagnostic=record["diagnostic"],
    )


def write_outcomes(path: str | os.PathLike, outcomes: Iterable[AttackOutcome]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for outcome in outcomes:
            fh.write(json.dumps(outcome.to_record(), sort_keys=True) + "\n")


def read_outcomes(path: str | os.PathLike) -> list[AttackOutcome]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(outcome_from_record(json.loads(line)))
    return out


# ---------------------------------------------------------------------------
# Word ranking and candidate generation
# ---------------------------------------------------------------------------


def rank_target_words(explanation: Explanation) -> list[tuple[int, str]]:
    """Positions ordered by descending |score|, ties by ascending position."""
    ranked = sorted(explanation.weights, key=lambda w: (-abs(w[2]), w[0]))
    return [(pos, tok) for pos, tok, _ in ranked]


def generate_candidates(
    token: str, config: AttackConfig, thesaurus: Thesaurus
) -> list[str]:
    """Ordered replacement candidates for one token.

    Synonyms first (thesaurus order), then single-character deletions (left
    to right, never emptying the token), then character duplications (left
    to right). Deduplicated, never equal to the original, truncated to
    ``max_candidates_per_word``.
    """
    raw: list[str] = []
    if TRANSFORM_SYNONYM in config.transforms:
        raw.extend(thesaurus.synonyms(token))
    if TRANSFORM_CHAR_DELETE in config.transforms and len(token) > 1:
        raw.extend(token[:i] + token[i + 1 :] for i in range(len(token)))
    if TRANSFORM_CHAR_INSERT in config.transforms:
        raw.extend(token[: i + 1] + token[i] + token[i + 1 :] for i in range(len(token)))
    out: list[str] = []
    for cand in raw:
        if cand and cand != token and cand not in out:
            out.append(cand)
        if len(out) >= config.max_candidates_per_word:
            break
    return out


# ---------------------------------------------------------------------------
# Greedy search
# ---------------------------------------------------------------------------


def word_budget(n_tokens: int, max_words_fraction: float) -> int:
    return math.ceil(max_words_fraction * n_tokens)


def greedy_attack(
    model,
    doc: TokenizedDoc,
    explanation: Explanation,
    config: AttackConfig,
    thesaurus: Thesaurus,
) -> AttackOutcome:
    """Attack one document, walking words in explanation-score order.

    Gates first: texts with len(raw) >= max_input_chars are skipped as too
    long, and documents the model already misclassifies are skipped. Each
    visited word commits the candidate that most (strictly) reduces the
    probability of the originally predicted class; the attack succeeds the
    moment the argmax changes.
    """
    original_text = " ".join(doc.tokens)
    if len(doc.raw) >= config.max_input_chars:
        return AttackOutcome(kind=SKIPPED, label=doc.label, raw_text=doc.raw,
                             original_text=original_text, skip_reason=SKIP_TOO_LONG)

    original_probs = np.asarray(model.predict_proba([original_text])[0], dtype=float)
    predicted = int(np.argmax(original_probs))
    if predicted != doc.label:
        return AttackOutcome(kind=SKIPPED, label=doc.label, raw_text=doc.raw,
                             original_text=original_text,
                             original_probs=tuple(original_probs),
                             skip_reason=SKIP_ALREADY_MISCLASSIFIED)

    tokens = list(doc.tokens)
    budget = word_budget(len(tokens), config.max_words_fraction)
    current_probs = original_probs
    modified: list[int] = []
    any_candidates = False

    for pos, _ in rank_target_words(explanation)[:budget]:
        candidates = generate_candidates(tokens[pos], config, thesaurus)
        if not candidates:
            continue
        any_candidates = True
        texts = []
        for cand in candidates:
            trial = list(tokens)
            trial[pos] = cand
            texts.append(" ".join(trial))
        probs = np.asarray(model.predict_proba(texts), dtype=float)
        target_col = probs[:, predicted]
        best = int(np.argmin(target_col))
        if target_col[best] >= current_probs[predicted]:
            continue  # nothing strictly decreasing at this position
        tokens[pos] = candidates[best]
        current_probs = probs[best]
        modified.append(pos)
        if int(np.argmax(current_probs)) != predicted:
            return AttackOutcome(
                kind=SUCCESSFUL, label=doc.label, raw_text=doc.raw,
                original_text=original_text, perturbed_text=" ".join(tokens),
                original_probs=tuple(original_probs),
                perturbed_probs=tuple(current_probs),
                modified_positions=tuple(modified),
            )

    if not any_candidates:
        return AttackOutcome(kind=SKIPPED, label=doc.label, raw_text=doc.raw,
                             original_text=original_text,
                             original_probs=tuple(original_probs),
                             skip_reason=SKIP_NO_CANDIDATES)
    return AttackOutcome(
        kind=FAILED, label=doc.label, raw_text=doc.raw,
        original_text=original_text, perturbed_text=" ".join(tokens),
        original_probs=tuple(original_probs), perturbed_probs=tuple(current_probs),
        modified_positions=tuple(modified),
    )


# ---------------------------------------------------------------------------
# Explanation drift
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExplanationDivergence:
    l1: float
    max_before: float
    max_after: float

    @property
    def max_drop(self) -> float:
        return self.max_before - self.max_after


def compare_explanations(before: Explanation, after: Explanation) -> ExplanationDivergence:
    """L1 distance between score vectors aligned on shared tokens.

    Scores are keyed by token string (summed when a token repeats); tokens
    present on only one side count with an implicit 0 on the other, so for
    disjoint token sets the distance is the total mass of both explanations.
    """
    if before.target_class != after.target_class:
        raise ValueError("explanations target different classes")

    def by_token(expl: Explanation) -> dict[str, float]:
        scores: dict[str, float] = {}
        for _, tok, score in expl.weights:
            scores[tok] = scores.get(tok, 0.0) + score
        return scores

    b, a = by_token(before), by_token(after)
    l1 = sum(abs(b.get(t, 0.0) - a.get(t, 0.0)) for t in set(b) | set(a))
    max_b = max((abs(s) for s in b.values()), default=0.0)
    max_a = max((abs(s) for s in a.values()), default=0.0)
    return ExplanationDivergence(l1=l1, max_before=max_b, max_after=max_a)


# ---------------------------------------------------------------------------
# Corpus-level driver
# ---------------------------------------------------------------------------


def attack_corpus(
    model,
    docs: Sequence[TokenizedDoc],
    lime_config: LimeConfig,
    attack_config: AttackConfig,
    thesaurus: Thesaurus,
    explanations: Sequence[Explanation] | None = None,
) -> tuple[list[AttackOutcome], dict]:
    """Explain and attack every document; never aborts on per-document errors.

    Pass ``explanations`` to reuse precomputed ones (they must line up with
    ``docs``); otherwise each document is explained with a seed derived from
    its index, making results independent of scheduling.
    """
    outcomes: list[AttackOutcome] = []
    for i, doc in enumerate(docs):
        try:
            if explanations is not None:
                expl = explanations[i]
            else:
                doc_config = replace(lime_config, seed=derive_seed(lime_config.seed, "doc", i))
                expl = explain(model, doc, config=doc_config)
            outcomes.append(greedy_attack(model, doc, expl, attack_config, thesaurus))
        except Exception as exc:  # noqa: BLE001 - per-doc faults become skips
            outcomes.append(AttackOutcome(
                kind=SKIPPED, label=doc.label, raw_text=doc.raw,
                original_text=" ".join(doc.tokens), skip_reason=SKIP_ERROR,
                diagnostic=f"{type(exc).__name__}: {exc}",
            ))
    return outcomes, summarize_outcomes(outcomes)


def summarize_outcomes(outcomes: Sequence[AttackOutcome]) -> dict:
    counts = {SUCCESSFUL: 0, FAILED: 0, SKIPPED: 0}
    for outcome in outcomes:
        counts[outcome.kind] += 1
    total = len(outcomes)
    attempted = counts[SUCCESSFUL] + counts[FAILED]
    return {
        "counts": counts,
        "total": total,
        "attempted": attempted,
        "success_rate_attempted": counts[SUCCESSFUL] / attempted if attempted else 0.0,
        "skip_rate": counts[SKIPPED] / total if total else 0.0,
    }
