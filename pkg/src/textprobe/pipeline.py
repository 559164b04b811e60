"""End-to-end experiment orchestration with resumable, seeded stages.

A run loads a dataset, balances and splits it, trains each configured
model, evaluates it, explains an evaluation subset, attacks that subset,
and merges everything into one report (JSON plus a CSV table). Every stage
persists its artifact; re-running skips stages whose artifacts exist, and
deleting one artifact recomputes only that stage and the report.

Stage seeds are derived from the global seed by name hashing, so adding a
stage never disturbs the randomness of earlier ones, and a re-run with the
same config produces a byte-identical report.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .attack import (
    AttackConfig,
    Thesaurus,
    attack_corpus,
    load_thesaurus,
    outcome_from_record,
    summarize_outcomes,
)
from .data import (
    binary_spec,
    load_binary_csv,
    load_multiclass_csv,
    multiclass_spec,
    stratified_split,
)
from .errors import ConfigError, StageError
from .lime import Explanation, LimeConfig, explain_corpus, explanation_from_record
from .metrics import (
    MetricError,
    adversarial_robustness,
    attack_resilience,
    auc_roc,
    auc_roc_ovr,
    auc_roc_per_class,
    classification_metrics,
    confusion_matrix,
    doe_model,
    spearman,
)
from .models import TrainConfig, load_model, save_model, train_cnn, train_forest, train_logistic
from .seeding import derive_seed
from .textprep import TextPipeline, TokenizedDoc, balance_classes, build_vocab, load_stopwords

REPORT_SCHEMA_VERSION = 1

_MODEL_KINDS = ("forest", "logistic", "cnn")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description (usually parsed from a JSON file)."""

    dataset_kind: str
    dataset_path: str
    output_dir: str
    seed: int = 0
    test_fraction: float = 0.2
    balance: bool = True
    eval_docs: int = 200
    vocab_min_df: int = 2
    vocab_max_size: int | None = 20000
    models: tuple[dict, ...] = ()
    lime: dict = field(default_factory=dict)
    attack: dict = field(default_factory=dict)
    thesaurus_path: str | None = None
    stopwords_path: str | None = None
    dataset_columns: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        try:
            dataset = obj["dataset"]
            config = cls(
                dataset_kind=dataset["kind"],
                dataset_path=dataset["path"],
                dataset_columns=dataset.get("columns", {}),
                balance=bool(dataset.get("balance", True)),
                output_dir=obj["output_dir"],
                seed=int(obj.get("seed", 0)),
                test_fraction=float(obj.get("test_fraction", 0.2)),
                eval_docs=int(obj.get("eval_docs", 200)),
                vocab_min_df=int(obj.get("vocab", {}).get("min_df", 2)),
                vocab_max_size=obj.get("vocab", {}).get("max_size", 20000),
                models=tuple(obj["models"]),
                lime=dict(obj.get("lime", {})),
                attack=dict(obj.get("attack", {})),
                thesaurus_path=obj.get("thesaurus"),
                stopwords_path=obj.get("stopwords"),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config key: {exc}") from exc
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                obj = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(obj)

    def validate(self) -> None:
        if self.dataset_kind not in ("multiclass", "binary"):
            raise ConfigError(f"unknown dataset kind {self.dataset_kind!r}")
        if not os.path.exists(self.dataset_path):
            raise ConfigError(f"dataset file not found: {self.dataset_path}")
        for path, label in ((self.thesaurus_path, "thesaurus"),
                            (self.stopwords_path, "stopwords")):
            if path is not None and not os.path.exists(path):
                raise ConfigError(f"{label} file not found: {path}")
        if not self.models:
            raise ConfigError("no models configured")
        names = [m.get("name", m.get("kind")) for m in self.models]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate model names: {names}")
        for m in self.models:
            if m.get("kind") not in _MODEL_KINDS:
                raise ConfigError(f"unknown model kind {m.get('kind')!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must be in (0, 1)")
        if self.eval_docs < 1:
            raise ConfigError("eval_docs must be >= 1")
        # surface bad lime/attack settings before any training happens
        self.lime_config(0)
        self.attack_config(0)

    def to_canonical_dict(self) -> dict:
        return {
            "dataset": {
                "kind": self.dataset_kind,
                "path": self.dataset_path,
                "columns": self.dataset_columns,
                "balance": self.balance,
            },
            "output_dir": self.output_dir,
            "seed": self.seed,
            "test_fraction": self.test_fraction,
            "eval_docs": self.eval_docs,
            "vocab": {"min_df": self.vocab_min_df, "max_size": self.vocab_max_size},
            "models": list(self.models),
            "lime": self.lime,
            "attack": self.attack,
            "thesaurus": self.thesaurus_path,
            "stopwords": self.stopwords_path,
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_canonical_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def lime_config(self, seed: int) -> LimeConfig:
        try:
            return LimeConfig(seed=seed, **self.lime)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad lime config: {exc}") from exc

    def attack_config(self, seed: int) -> AttackConfig:
        obj = dict(self.attack)
        if "transforms" in obj:
            obj["transforms"] = tuple(obj["transforms"])
        try:
            return AttackConfig(seed=seed, **obj)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad attack config: {exc}") from exc

    def n_classes(self) -> int:
        return 3 if self.dataset_kind == "multiclass" else 2

    def dataset_spec(self):
        if self.dataset_kind == "multiclass":
            return multiclass_spec(self.dataset_path)
        return binary_spec(self.dataset_path)


# ---------------------------------------------------------------------------
# Stage helpers
# ---------------------------------------------------------------------------


def _sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_dataset(config: ExperimentConfig):
    cols = config.dataset_columns
    if config.dataset_kind == "multiclass":
        return load_multiclass_csv(
            config.dataset_path,
            class_col=cols.get("class", "class"),
            text_col=cols.get("text", "tweet"),
        )
    return load_binary_csv(
        config.dataset_path,
        score_col=cols.get("score", "hate_speech_score"),
        text_col=cols.get("text", "text"),
        aggregate=cols.get("aggregate", "row"),
        comment_id_col=cols.get("comment_id", "comment_id"),
    )


def _train_one(kind: str, mconf: dict, train_docs, vocab, pipeline, seed, n_classes):
    if kind == "forest":
        return train_forest(
            train_docs, vocab,
            n_trees=int(mconf.get("n_trees", 10)),
            seed=seed, pipeline=pipeline, n_classes=n_classes,
            min_leaf=int(mconf.get("min_leaf", 2)),
            max_depth=mconf.get("max_depth"),
        )
    tc = TrainConfig(
        learning_rate=float(mconf.get("learning_rate", 1e-3)),
        epochs=int(mconf.get("epochs", 5)),
        batch_size=int(mconf.get("batch_size", 32)),
        seed=seed,
    )
    if kind == "logistic":
        return train_logistic(train_docs, vocab, tc, pipeline=pipeline, n_classes=n_classes)
    if kind == "cnn":
        return train_cnn(
            train_docs, vocab, tc,
            embed_dim=int(mconf.get("embed_dim", 16)),
            n_filters=int(mconf.get("n_filters", 8)),
            pipeline=pipeline, n_classes=n_classes,
        )
    raise ConfigError(f"unknown model kind {kind!r}")


def _predict_in_batches(model, texts: Sequence[str], batch: int = 256) -> np.ndarray:
    parts = [model.predict_proba(texts[i : i + batch]) for i in range(0, len(texts), batch)]
    return np.concatenate(parts, axis=0)


def _evaluate_model(model, test_docs: Sequence[TokenizedDoc], n_classes: int) -> dict:
    texts = [" ".join(d.tokens) for d in test_docs]
    labels = [d.label for d in test_docs]
    probs = _predict_in_batches(model, texts)
    preds = probs.argmax(axis=1)
    cm = confusion_matrix(labels, preds.tolist(), n_classes)
    stats = classification_metrics(cm)
    if n_classes == 2:
        auc = auc_roc(probs[:, 1], labels)
    else:
        auc = auc_roc_ovr(probs, labels)
    return {
        "labels": labels,
        "predictions": preds.tolist(),
        "probs": probs.tolist(),
        "confusion": cm.tolist(),
        "metrics": stats,
        "auc": auc,
        "auc_per_class": auc_roc_per_class(probs, labels),
    }


# ---------------------------------------------------------------------------
# The experiment driver
# ---------------------------------------------------------------------------


class _Paths:
    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.models = self.root / "models"
        self.eval = self.root / "eval"
        self.explanations = self.root / "explanations"
        self.attacks = self.root / "attacks"
        self.report_json = self.root / "report.json"
        self.report_csv = self.root / "report.csv"
        self.manifest = self.root / "manifest.json"
        self.state = self.root / "run_state.json"

    def make_dirs(self):
        for d in (self.root, self.models, self.eval, self.explanations, self.attacks):
            d.mkdir(parents=True, exist_ok=True)

    def model_file(self, name: str) -> Path:
        return self.models / f"{name}.tpm"

    def eval_file(self, name: str) -> Path:
        return self.eval / f"{name}.json"

    def explanations_file(self, name: str) -> Path:
        return self.explanations / f"{name}.jsonl"

    def attacks_file(self, name: str) -> Path:
        return self.attacks / f"{name}.jsonl"


def run_experiment(config: ExperimentConfig) -> dict:
    """Run all stages, write artifacts and the merged report; returns the report."""
    paths = _Paths(config.output_dir)
    paths.make_dirs()
    cfg_hash = config.config_hash()
    _check_run_state(paths, cfg_hash)

    timings: dict[str, float] = {}
    stage_seeds: dict[str, int] = {}

    def timed(stage: str, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except StageError:
            raise
        except Exception as exc:
            raise StageError(stage, f"{type(exc).__name__}: {exc}") from exc
        timings[stage] = time.perf_counter() - start
        return result

    # -- data ---------------------------------------------------------------
    def data_stage():
        docs = _load_dataset(config)
        if config.balance:
            docs = balance_classes(docs, derive_seed(config.seed, "balance"),
                                   n_classes=config.n_classes())
        return stratified_split(docs, config.test_fraction, derive_seed(config.seed, "split"))

    stage_seeds["balance"] = derive_seed(config.seed, "balance")
    stage_seeds["split"] = derive_seed(config.seed, "split")
    split = timed("data", data_stage)

    pipeline = TextPipeline(stopwords=load_stopwords(config.stopwords_path), use_stemmer=True)
    train_tok = pipeline.tokenize_corpus(split.train)
    test_tok = pipeline.tokenize_corpus(split.test)
    vocab = build_vocab(train_tok, min_df=config.vocab_min_df, max_size=config.vocab_max_size)
    thesaurus = load_thesaurus(config.thesaurus_path)

    eval_indices = [i for i, d in enumerate(test_tok) if d.tokens][: config.eval_docs]
    eval_docs = [test_tok[i] for i in eval_indices]
    if not eval_docs:
        raise ConfigError("no non-empty test documents available to explain/attack")

    model_rows = []
    for mconf in config.models:
        kind = mconf["kind"]
        name = mconf.get("name", kind)
        row = _run_model_stages(
            config, paths, cfg_hash, timed, stage_seeds, kind, name, mconf,
            train_tok, test_tok, eval_indices, eval_docs, vocab, pipeline, thesaurus,
        )
        model_rows.append(row)

    report = timed("report", lambda: _build_report(config, cfg_hash, model_rows))
    _write_report(paths, report)
    _write_manifest(paths, config, cfg_hash, stage_seeds, timings)
    return report


def _check_run_state(paths: _Paths, cfg_hash: str) -> None:
    if paths.state.exists():
        state = json.loads(paths.state.read_text(encoding="utf-8"))
        if state.get("config_hash") != cfg_hash:
            raise ConfigError(
                f"output dir {paths.root} holds artifacts for a different config; "
                "use a clean directory"
            )
    else:
        paths.state.write_text(json.dumps({"config_hash": cfg_hash}) + "\n", encoding="utf-8")


def _run_model_stages(config, paths, cfg_hash, timed, stage_seeds, kind, name, mconf,
                      train_tok, test_tok, eval_indices, eval_docs, vocab, pipeline,
                      thesaurus):
    n_classes = config.n_classes()

    # -- train ---------------------------------------------------------------
    train_seed = derive_seed(config.seed, "train", name)
    stage_seeds[f"train:{name}"] = train_seed
    model_file = paths.model_file(name)

    def train_stage():
        if model_file.exists():
            return load_model(model_file, expected_kind=kind)
        model = _train_one(kind, mconf, train_tok, vocab, pipeline, train_seed, n_classes)
        save_model(model, model_file)
        return model

    model = timed(f"train:{name}", train_stage)

    # -- evaluate -------------------------------------------------------------
    eval_file = paths.eval_file(name)

    def eval_stage():
        if eval_file.exists():
            return json.loads(eval_file.read_text(encoding="utf-8"))
        result = _evaluate_model(model, test_tok, n_classes)
        eval_file.write_text(json.dumps(result, sort_keys=True) + "\n", encoding="utf-8")
        return result

    eval_result = timed(f"evaluate:{name}", eval_stage)

    # -- explain ----------------------------------------------------------------
    explain_seed = derive_seed(config.seed, "explain", name)
    stage_seeds[f"explain:{name}"] = explain_seed
    expl_file = paths.explanations_file(name)

    def explain_stage():
        if expl_file.exists():
            records = [json.loads(line) for line in
                       expl_file.read_text(encoding="utf-8").splitlines() if line]
            return [explanation_from_record(r, test_tok[r["doc_index"]]) for r in records]
        lime_config = config.lime_config(explain_seed)
        explanations = explain_corpus(model, eval_docs, lime_config)
        with open(expl_file, "w", encoding="utf-8") as fh:
            for idx, expl in zip(eval_indices, explanations):
                record = expl.to_record()
                record["doc_index"] = idx
                fh.write(json.dumps(record, sort_keys=True) + "\n")
        return explanations

    explanations = timed(f"explain:{name}", explain_stage)

    # -- attack ----------------------------------------------------------------
    attack_seed = derive_seed(config.seed, "attack", name)
    stage_seeds[f"attack:{name}"] = attack_seed
    attack_file = paths.attacks_file(name)

    def attack_stage():
        if attack_file.exists():
            records = [json.loads(line) for line in
                       attack_file.read_text(encoding="utf-8").splitlines() if line]
            return [outcome_from_record(r) for r in records]
        lime_config = config.lime_config(explain_seed)
        outcomes, _ = attack_corpus(model, eval_docs, lime_config,
                                    config.attack_config(attack_seed), thesaurus,
                                    explanations=explanations)
        with open(attack_file, "w", encoding="utf-8") as fh:
            for idx, outcome in zip(eval_indices, outcomes):
                record = outcome.to_record()
                record["doc_index"] = idx
                fh.write(json.dumps(record, sort_keys=True) + "\n")
        return outcomes

    outcomes = timed(f"attack:{name}", attack_stage)

    return _model_report_row(name, kind, eval_result, explanations, outcomes)


def _model_report_row(name, kind, eval_result, explanations, outcomes) -> dict:
    doe_all = doe_model(explanations)
    attacked_flags = [o.kind in ("successful", "failed") for o in outcomes]
    attacked_doe = [doe for (_, doe), flag in
                    zip(doe_all.per_sentence, attacked_flags) if flag]
    doe_attacked = (math.fsum(attacked_doe) / len(attacked_doe)) if attacked_doe else None

    try:
        rob = adversarial_robustness(outcomes)
        ar = rob.ar
        robustness = {
            "accuracy_before": rob.accuracy_before,
            "accuracy_under_attack": rob.accuracy_under_attack,
            "attacked_count": rob.attacked_count,
            "skipped_count": rob.skipped_count,
        }
    except MetricError as exc:
        ar = None
        robustness = {"error": str(exc)}

    def resilience(ar_value, doe_value):
        if ar_value is None or doe_value is None:
            return None
        try:
            return attack_resilience(ar_value, doe_value)
        except MetricError:
            return None

    resil = resilience(ar, doe_all.model_doe)
    stats = eval_result["metrics"]
    return {
        "model": name,
        "kind": kind,
        "accuracy": stats["accuracy"],
        "precision": stats["weighted_precision"],
        "recall": stats["weighted_recall"],
        "f1": stats["weighted_f1"],
        "macro": {
            "precision": stats["macro_precision"],
            "recall": stats["macro_recall"],
            "f1": stats["macro_f1"],
        },
        "per_class": stats["per_class"],
        "auc": eval_result["auc"],
        "doe": doe_all.model_doe,
        "doe_attacked": doe_attacked,
        "ar": ar,
        "attack_resilience": resil,
        "attack_resilience_reciprocal": (
            None if resil is None or resil == 0.0 else 1.0 / resil
        ),
        "attack_resilience_attacked": resilience(ar, doe_attacked),
        "attack_summary": summarize_outcomes(outcomes),
        "robustness": robustness,
    }


def doe_vs_robustness_table(rows: Sequence[dict]) -> dict:
    """Models ordered by descending DoE with their Ar values and the rank
    correlation between the two columns (midranks on ties)."""
    if len(rows) < 2:
        raise ValueError("need at least 2 model reports")
    usable = [(r["model"], r["doe"], r["ar"]) for r in rows]
    ordered = sorted(usable, key=lambda item: (-(item[1] if item[1] is not None else -1),
                                               item[0]))
    doe_values = [d for _, d, _ in ordered]
    ar_values = [a for _, _, a in ordered]
    ties = len(set(doe_values)) < len(doe_values)
    if any(v is None for v in doe_values) or any(v is None for v in ar_values):
        corr = None
    else:
        corr = spearman(doe_values, ar_values)
        if math.isnan(corr):
            corr = None
    return {
        "order": [m for m, _, _ in ordered],
        "rows": [{"model": m, "doe": d, "ar": a} for m, d, a in ordered],
        "spearman": corr,
        "ties": ties,
    }


def _build_report(config: ExperimentConfig, cfg_hash: str, model_rows: list[dict]) -> dict:
    spec = config.dataset_spec()
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool_version": __version__,
        "config_hash": cfg_hash,
        "seed": config.seed,
        "dataset": {
            "name": spec.name,
            "task": spec.task,
            "classes": list(spec.class_names),
            "path": config.dataset_path,
        },
        "models": model_rows,
    }
    if len(model_rows) >= 2:
        report["doe_vs_robustness"] = doe_vs_robustness_table(model_rows)
    return report


CSV_COLUMNS = ["model", "accuracy", "precision", "recall", "f1", "auc", "doe",
               "ar", "attack_resilience"]


def _write_report(paths: _Paths, report: dict) -> None:
    paths.report_json.write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    with open(paths.report_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in report["models"]:
            writer.writerow([
                row["model"],
                *(("" if row[c] is None else repr(row[c])) for c in CSV_COLUMNS[1:]),
            ])


def _write_manifest(paths: _Paths, config: ExperimentConfig, cfg_hash: str,
                    stage_seeds: dict, timings: dict) -> None:
    digests = {"dataset": _sha256_file(config.dataset_path)}
    for label, path in (("thesaurus", config.thesaurus_path),
                        ("stopwords", config.stopwords_path)):
        if path:
            digests[label] = _sha256_file(path)
    manifest = {
        "config_hash": cfg_hash,
        "tool_version": __version__,
        "stage_seeds": stage_seeds,
        "wall_clock_s": {k: round(v, 6) for k, v in timings.items()},
        "input_digests": digests,
        "report_digest": hashlib.sha256(paths.report_json.read_bytes()).hexdigest(),
    }
    paths.manifest.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n",
                              encoding="utf-8")
