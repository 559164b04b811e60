"""Command-line interface.

Subcommands: ``train``, ``evaluate``, ``explain``, ``attack``, ``report``,
and ``run`` (all stages from a JSON config). Exit codes: 0 success, 2
validation/usage error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .attack import AttackConfig, attack_corpus, load_thesaurus, summarize_outcomes
from .data import load_binary_csv, load_multiclass_csv, stratified_split
from .errors import ConfigError, DataError, StageError, TextProbeError
from .lime import LimeConfig, explain
from .metrics import auc_roc, auc_roc_ovr, classification_metrics, confusion_matrix
from .models import TrainConfig, load_model, save_model, train_cnn, train_forest, train_logistic
from .pipeline import ExperimentConfig, run_experiment
from .seeding import derive_seed
from .textprep import RawDoc, TextPipeline, build_vocab, balance_classes, load_stopwords

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_STAGE = 3


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", choices=["multiclass", "binary"], required=True)
    p.add_argument("--data-path", required=True)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-balance", action="store_true",
                   help="skip class balancing before the split")
    p.add_argument("--class-col", default="class")
    p.add_argument("--text-col", default=None,
                   help="text column (default: tweet for multiclass, text for binary)")
    p.add_argument("--score-col", default="hate_speech_score")


def _load_docs(args):
    text_col = args.text_col or ("tweet" if args.dataset == "multiclass" else "text")
    if args.dataset == "multiclass":
        docs = load_multiclass_csv(args.data_path, class_col=args.class_col, text_col=text_col)
        n_classes = 3
    else:
        docs = load_binary_csv(args.data_path, score_col=args.score_col, text_col=text_col)
        n_classes = 2
    if not args.no_balance:
        docs = balance_classes(docs, derive_seed(args.seed, "balance"), n_classes=n_classes)
    return docs, n_classes


def _prepare(args):
    docs, n_classes = _load_docs(args)
    split = stratified_split(docs, args.test_fraction, derive_seed(args.seed, "split"))
    pipeline = TextPipeline(stopwords=load_stopwords(getattr(args, "stopwords", None)))
    train_tok = pipeline.tokenize_corpus(split.train)
    test_tok = pipeline.tokenize_corpus(split.test)
    return train_tok, test_tok, pipeline, n_classes


def _cmd_train(args) -> int:
    train_tok, _, pipeline, n_classes = _prepare(args)
    vocab = build_vocab(train_tok, min_df=args.min_df, max_size=args.max_vocab)
    seed = derive_seed(args.seed, "train", args.model)
    if args.model == "forest":
        model = train_forest(train_tok, vocab, n_trees=args.trees, seed=seed,
                             pipeline=pipeline, n_classes=n_classes)
    else:
        tc = TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                         batch_size=args.batch_size, seed=seed)
        if args.model == "logistic":
            model = train_logistic(train_tok, vocab, tc, pipeline=pipeline,
                                   n_classes=n_classes)
        else:
            model = train_cnn(train_tok, vocab, tc, embed_dim=args.embed_dim,
                              n_filters=args.filters, pipeline=pipeline,
                              n_classes=n_classes)
    save_model(model, args.out)
    print(json.dumps({"model": args.model, "out": args.out, "vocab_size": len(vocab),
                      "train_docs": len(train_tok)}))
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    model = load_model(args.model_file)
    _, test_tok, _, n_classes = _prepare(args)
    texts = [" ".join(d.tokens) for d in test_tok]
    labels = [d.label for d in test_tok]
    probs = np.concatenate([model.predict_proba(texts[i:i + 256])
                            for i in range(0, len(texts), 256)])
    preds = probs.argmax(axis=1).tolist()
    cm = confusion_matrix(labels, preds, n_classes)
    stats = classification_metrics(cm)
    auc = auc_roc(probs[:, 1], labels) if n_classes == 2 else auc_roc_ovr(probs, labels)
    result = {"metrics": stats, "auc": auc, "confusion": cm.tolist(),
              "test_docs": len(test_tok)}
    payload = json.dumps(result, sort_keys=True, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    print(payload)
    return EXIT_OK


def _cmd_explain(args) -> int:
    model = load_model(args.model_file)
    doc = model.pipeline.tokenize_doc(RawDoc(text=args.text, label=0))
    config = LimeConfig(
        n_samples=args.samples,
        kernel_width=args.kernel_width,
        ridge_lambda=args.ridge_lambda,
        top_k=args.top_k,
        seed=args.seed,
        exhaustive=args.exhaustive,
    )
    expl = explain(model, doc, target_class=args.target_class, config=config)
    print(expl.to_json())
    return EXIT_OK


def _cmd_attack(args) -> int:
    model = load_model(args.model_file)
    _, test_tok, _, _ = _prepare(args)
    docs = [d for d in test_tok if d.tokens]
    if args.max_docs:
        docs = docs[: args.max_docs]
    thesaurus = load_thesaurus(args.thesaurus)
    lime_config = LimeConfig(n_samples=args.samples, seed=derive_seed(args.seed, "explain"),
                             top_k=None)
    attack_config = AttackConfig(
        transforms=tuple(args.transforms.split(",")),
        max_words_fraction=args.max_words_fraction,
        max_candidates_per_word=args.max_candidates,
        max_input_chars=args.max_input_chars,
        seed=derive_seed(args.seed, "attack"),
    )
    outcomes, summary = attack_corpus(model, docs, lime_config, attack_config, thesaurus)
    with open(args.out, "w", encoding="utf-8") as fh:
        for outcome in outcomes:
            fh.write(json.dumps(outcome.to_record(), sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True, indent=2))
    return EXIT_OK


def _cmd_report(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    report = run_experiment(config)
    print(json.dumps({"report": str(config.output_dir) + "/report.json",
                      "models": [row["model"] for row in report["models"]]}))
    return EXIT_OK


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    report = run_experiment(config)
    summary = {
        "output_dir": config.output_dir,
        "models": {row["model"]: {"accuracy": row["accuracy"], "doe": row["doe"],
                                  "ar": row["ar"],
                                  "attack_resilience": row["attack_resilience"]}
                   for row in report["models"]},
    }
    print(json.dumps(summary, sort_keys=True, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="textprobe", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and save it")
    _add_dataset_args(p)
    p.add_argument("--model", choices=["forest", "logistic", "cnn"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trees", type=int, default=10)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--embed-dim", type=int, default=16)
    p.add_argument("--filters", type=int, default=8)
    p.add_argument("--min-df", type=int, default=2)
    p.add_argument("--max-vocab", type=int, default=20000)
    p.add_argument("--stopwords", default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a saved model on the test split")
    _add_dataset_args(p)
    p.add_argument("--model-file", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--stopwords", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("explain", help="explain one text with the local surrogate")
    p.add_argument("--model-file", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--kernel-width", type=float, default=None)
    p.add_argument("--ridge-lambda", type=float, default=1.0)
    p.add_argument("--target-class", type=int, default=None)
    p.add_argument("--exhaustive", action="store_true")
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("attack", help="attack the test split of a dataset")
    _add_dataset_args(p)
    p.add_argument("--model-file", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--transforms", default="synonym,char_insert,char_delete")
    p.add_argument("--max-words-fraction", type=float, default=0.3)
    p.add_argument("--max-candidates", type=int, default=10)
    p.add_argument("--max-input-chars", type=int, default=100)
    p.add_argument("--max-docs", type=int, default=200)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--thesaurus", default=None)
    p.add_argument("--stopwords", default=None)
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("report", help="rebuild the merged report from run artifacts")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("run", help="run all stages from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except TextProbeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
