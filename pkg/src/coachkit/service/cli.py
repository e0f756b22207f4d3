"""Command-line workflow: ingest, build-dataset, train, evaluate, ablate,
recommend, serve.

Every subcommand writes its artifacts into the workdir and prints a JSON
summary to stdout.  Validation failures exit 1, runtime failures exit 2,
both with a machine-readable error object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from coachkit import baselines
from coachkit.corpus import (
    Corpus,
    CorpusError,
    load_corpus_file,
    load_questions_file,
    save_corpus_file,
    save_questions_file,
    validate_taxonomy,
)
from coachkit.dataset import (
    DatasetError,
    SPLIT_NAMES,
    balance_per_question,
    load_manifest,
    make_splits,
    save_manifest,
    split_stats,
    stats_table,
)
from coachkit.evaluation import (
    AblationCell,
    DataBundle,
    EvalError,
    ablation_run,
    ablation_table,
    build_report,
    save_report,
)
from coachkit.neural import (
    InvalidConfig,
    ModelConfig,
    TrainingConfig,
    init_model,
    save_model,
    save_train_log,
    train,
)
from coachkit.neural.model import NeuralError
from coachkit.prep import encode_split, split_labels, tfidf_features, vocab_from_split
from coachkit.recommend import (
    NothingEligible,
    Policy,
    RecommendError,
    ReviewLedger,
    build_batch,
    score_calls,
)
from coachkit.corpus import Label
from coachkit.service.config import ConfigError, load_config
from coachkit.service.scoring import load_scorer
from coachkit.textproc import TextProcError

EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

VALIDATION_ERRORS = (
    CorpusError,
    DatasetError,
    TextProcError,
    ConfigError,
    InvalidConfig,
    FileNotFoundError,
    json.JSONDecodeError,
    ValueError,
)
RUNTIME_ERRORS = (NeuralError, EvalError, RecommendError, baselines.BaselineError, OSError)


def _emit(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": {"code": kind, "message": message}}), file=sys.stderr)
    return code


def _load_workdir_corpus(workdir: Path) -> Corpus:
    corpus = Corpus()
    load_questions_file(workdir / "questions.json", corpus)
    # ingest already redacted the stored corpus
    load_corpus_file(workdir / "corpus.jsonl", corpus, patterns=None)
    return corpus


def cmd_ingest(args: argparse.Namespace) -> int:
    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    corpus = Corpus()
    load_questions_file(args.questions, corpus)
    for path in args.files:
        load_corpus_file(path, corpus)  # applies PII redaction
    save_corpus_file(corpus, workdir / "corpus.jsonl")
    save_questions_file(corpus.questions.values(), workdir / "questions.json")
    report = validate_taxonomy(q.to_record() for q in corpus.questions.values())
    _emit(
        {
            "command": "ingest",
            "transcripts": len(corpus.transcripts),
            "grades": len(corpus.grades),
            "questions": len(corpus.questions),
            "taxonomy": report.to_json(),
            "corpus_path": str(workdir / "corpus.jsonl"),
        }
    )
    return 0


def _holdout_question_splits(pairs, fractions, seed):
    """Alternative split mode: whole questions held out per split."""
    question_ids = sorted({p.question_id for p in pairs})
    rng = np.random.default_rng(seed)
    order = [question_ids[i] for i in rng.permutation(len(question_ids))]
    n = len(order)
    cuts = [int(n * fractions[0] + 0.5), int(n * (fractions[0] + fractions[1]) + 0.5)]
    assignment = {}
    for idx, qid in enumerate(order):
        name = SPLIT_NAMES[0] if idx < cuts[0] else SPLIT_NAMES[1] if idx < cuts[1] else SPLIT_NAMES[2]
        assignment[qid] = name
    from coachkit.dataset import DatasetSplit

    buckets = {name: [] for name in SPLIT_NAMES}
    for p in pairs:
        buckets[assignment[p.question_id]].append(p)
    return tuple(DatasetSplit(name=name, pairs=buckets[name], seed=seed) for name in SPLIT_NAMES)


def cmd_build_dataset(args: argparse.Namespace) -> int:
    workdir = Path(args.workdir)
    corpus = _load_workdir_corpus(workdir)
    fractions = tuple(float(x) for x in args.fractions.split(","))
    if len(fractions) != 3:
        raise DatasetError(f"expected three fractions, got {args.fractions!r}")
    pairs = balance_per_question(corpus.labeled_pairs(), max_ratio=args.max_ratio, seed=args.seed)
    if args.holdout_questions:
        splits = _holdout_question_splits(pairs, fractions, args.seed)
    else:
        splits = make_splits(pairs, fractions, seed=args.seed, max_ratio=args.max_ratio)
    save_manifest(splits, fractions, args.seed, workdir / "splits.json")
    stats = {split.name: split_stats(split, corpus) for split in splits}
    (workdir / "stats.json").write_text(
        json.dumps({name: st.to_json() for name, st in stats.items()}, indent=2, sort_keys=True)
        + "\n",
        encoding="utf-8",
    )
    (workdir / "stats.txt").write_text(stats_table(stats), encoding="utf-8")
    _emit(
        {
            "command": "build-dataset",
            "seed": args.seed,
            "balanced_pairs": len(pairs),
            "split_sizes": {split.name: len(split) for split in splits},
            "manifest_path": str(workdir / "splits.json"),
        }
    )
    return 0


def _train_transformer(corpus, splits, cfg_doc: dict, workdir: Path, summary: dict) -> None:
    train_split, val_split, _ = splits
    enc_cfg = cfg_doc.get("encoding", {})
    max_len = int(enc_cfg.get("max_len", 128))
    include_query = bool(enc_cfg.get("include_query", True))
    truncate_from = enc_cfg.get("truncate_from", "tail")
    vocab = vocab_from_split(corpus, train_split, max_size=int(enc_cfg.get("vocab_size", 4000)))
    enc_tr = encode_split(corpus, train_split, vocab, max_len, include_query, truncate_from)
    enc_va = encode_split(corpus, val_split, vocab, max_len, include_query, truncate_from)

    model_doc = dict(cfg_doc.get("model", {}))
    model_doc.setdefault("d_model", 64)
    model_doc.setdefault("n_heads", 4)
    model_doc.setdefault("n_layers", 2)
    model_doc.setdefault("d_ff", 128)
    model_doc["max_len"] = max_len
    model_doc["vocab_size"] = vocab.size
    mcfg = ModelConfig(**model_doc)
    tcfg = TrainingConfig(**cfg_doc.get("training", {}))

    model = init_model(mcfg)
    result = train(model, enc_tr, enc_va, tcfg)

    vocab.save(workdir / "vocab.json")
    save_model(model, workdir / "model.acam", vocab.content_hash())
    save_train_log(result, workdir / "train_log.jsonl")
    summary.update(
        {
            "artifact": str(workdir / "model.acam"),
            "vocab": str(workdir / "vocab.json"),
            "best_epoch": result.best_epoch,
            "best_val_accuracy": result.best_val_accuracy,
            "epochs": [asdict(r) for r in result.log],
        }
    )


def _train_baseline(kind: str, corpus, splits, cfg_doc: dict, workdir: Path, summary: dict) -> None:
    train_split = splits[0]
    tfidf_cfg = cfg_doc.get("tfidf", {})
    include_query = bool(tfidf_cfg.get("include_query", True))
    tfidf, X_train, _ = tfidf_features(
        corpus,
        train_split,
        [],
        max_features=tfidf_cfg.get("max_features", 4000),
        include_query=include_query,
    )
    y_train = split_labels(train_split)
    params = cfg_doc.get(kind, {})
    if kind == "nb":
        model = baselines.train_naive_bayes(X_train, y_train, alpha=params.get("alpha", 1.0))
    elif kind == "svm":
        model = baselines.train_linear_svm(
            X_train,
            y_train,
            lam=params.get("lambda", 1e-4),
            epochs=params.get("epochs", 20),
            seed=params.get("seed", 0),
        )
    elif kind == "tree":
        model = baselines.train_decision_tree(
            X_train, y_train,
            max_depth=params.get("max_depth", 20),
            min_leaf=params.get("min_leaf", 2),
        )
    else:
        model = baselines.train_random_forest(
            X_train, y_train,
            n_trees=params.get("n_trees", 100),
            max_depth=params.get("max_depth", 20),
            min_leaf=params.get("min_leaf", 2),
            feature_frac=params.get("feature_frac"),
            seed=params.get("seed", 0),
        )
    path = workdir / f"model.{kind}.json"
    baselines.save_model_bundle(model, tfidf, path)
    summary["artifact"] = str(path)


def cmd_train(args: argparse.Namespace) -> int:
    workdir = Path(args.workdir)
    corpus = _load_workdir_corpus(workdir)
    splits = load_manifest(workdir / "splits.json")
    cfg_doc = json.loads(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    summary = {"command": "train", "model": args.model}
    if args.model == "transformer":
        _train_transformer(corpus, splits, cfg_doc, workdir, summary)
    else:
        _train_baseline(args.model, corpus, splits, cfg_doc, workdir, summary)
    _emit(summary)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    import time

    workdir = Path(args.workdir)
    corpus = _load_workdir_corpus(workdir)
    splits = {s.name: s for s in load_manifest(workdir / "splits.json")}
    split = splits[args.split]
    vocab_path = args.vocab
    if vocab_path is None and (workdir / "vocab.json").exists():
        vocab_path = workdir / "vocab.json"
    scorer = load_scorer(args.model, vocab_path)
    preds = []
    timings = []
    for pair in split.pairs:
        question = corpus.question(pair.question_id)
        transcript = corpus.transcript(pair.call_id)
        started = time.perf_counter()
        p = scorer.coachable_probability(question.text, transcript.text())
        timings.append(time.perf_counter() - started)
        preds.append(int(Label.COACHABLE) if p > 0.5 else int(Label.NOT_COACHABLE))
    gold = [int(p.label) for p in split.pairs]
    report = build_report(
        model_id=Path(args.model).name,
        predictions=preds,
        gold=gold,
        pair_keys=[p.key for p in split.pairs],
        questions=corpus.questions,
        config_snapshot={"split": args.split, "artifact": Path(args.model).name},
    )
    save_report(
        report,
        workdir / "eval_report.json",
        workdir / "eval_report.txt",
        workdir / "per_type.csv",
    )
    # latency documented in the summary only; the report file stays
    # byte-deterministic across runs
    p50_ms = 1000.0 * sorted(timings)[len(timings) // 2] if timings else 0.0
    _emit({
        "command": "evaluate",
        "split": args.split,
        "p50_scoring_ms": round(p50_ms, 3),
        **report.to_json(),
    })
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    workdir = Path(args.workdir)
    corpus = _load_workdir_corpus(workdir)
    splits = load_manifest(workdir / "splits.json")
    grid_doc = json.loads(Path(args.grid).read_text(encoding="utf-8"))
    cells = [
        AblationCell(
            name=c["name"],
            model_kind=c.get("model_kind", "transformer"),
            max_len=int(c.get("max_len", 128)),
            include_query=bool(c.get("include_query", True)),
        )
        for c in grid_doc["cells"]
    ]
    mcfg = ModelConfig(**grid_doc["model"]) if "model" in grid_doc else None
    tcfg = TrainingConfig(**grid_doc["training"]) if "training" in grid_doc else None
    bundle = DataBundle(corpus=corpus, train=splits[0], validation=splits[1], test=splits[2])
    results = ablation_run(
        cells, bundle, seed=grid_doc.get("seed", 0), model_config=mcfg, training_config=tcfg
    )
    doc = {cell.name: report.to_json() for cell, report in results}
    (workdir / "ablation.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (workdir / "ablation.txt").write_text(ablation_table(results), encoding="utf-8")
    _emit({"command": "ablate", "rows": list(doc)})
    return 0


def cmd_recommend(args: argparse.Namespace) -> int:
    workdir = Path(args.workdir)
    corpus = _load_workdir_corpus(workdir)
    question = corpus.question(args.question)
    model_path = args.model or (
        workdir / "model.acam" if (workdir / "model.acam").exists() else None
    )
    if model_path is None:
        raise FileNotFoundError("no model artifact; pass --model or train one first")
    scorer = load_scorer(model_path, args.vocab or workdir / "vocab.json")
    whitelist = frozenset(q.question_id for q in corpus.questions.values() if q.whitelisted)
    policy = Policy(
        whitelist=whitelist,
        per_agent_cap=args.per_agent_cap,
        batch_size=args.batch_size,
        positive_fraction=args.positive_fraction,
    )
    calls = list(corpus.transcripts.values())
    if args.agent:
        calls = [c for c in calls if c.agent_id == args.agent]
    ranked = score_calls(scorer, question, calls, policy)
    ledger = ReviewLedger(workdir / "ledger.jsonl")
    try:
        batch = build_batch(
            ranked,
            {c.call_id: c.agent_id for c in calls},
            question.question_id,
            policy,
            ledger,
        )
        payload = batch.to_payload()
    except NothingEligible:
        payload = {"batch_id": None, "question_id": question.question_id, "items": []}
    _emit({"command": "recommend", **payload})
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from coachkit.service.api import create_app

    config = load_config(args.config)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coachkit",
        description="Train coachability classifiers and serve guard-railed call recommendations.",
    )
    parser.add_argument("--workdir", default="workdir", help="artifact directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate, redact and normalize raw corpus files")
    p.add_argument("files", nargs="+", help="JSONL corpus files (transcript + grade records)")
    p.add_argument("--questions", required=True, help="JSON array of question records")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-dataset", help="derive labels, balance and split")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fractions", default="0.7,0.1,0.2")
    p.add_argument("--max-ratio", type=float, default=2.0)
    p.add_argument(
        "--holdout-questions",
        action="store_true",
        help="hold out whole questions per split instead of sharing them",
    )
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train", help="train a classifier on the train split")
    p.add_argument("--model", required=True, choices=["nb", "svm", "tree", "forest", "transformer"])
    p.add_argument("--config", help="JSON config file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a model artifact on a split")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", help="vocabulary file (transformer artifacts)")
    p.add_argument("--split", default="test", choices=list(SPLIT_NAMES))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="run an ablation grid")
    p.add_argument("--grid", required=True, help="JSON grid file")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("recommend", help="build a guard-railed recommendation batch")
    p.add_argument("--question", required=True)
    p.add_argument("--agent", help="restrict candidates to one agent")
    p.add_argument("--model", help="model artifact (default workdir/model.acam)")
    p.add_argument("--vocab")
    p.add_argument("--batch-size", type=int, default=6)
    p.add_argument("--per-agent-cap", type=int, default=5)
    p.add_argument("--positive-fraction", type=float, default=0.5)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; the CLI contract wants 1
        return EXIT_VALIDATION if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except VALIDATION_ERRORS as exc:
        return _fail(EXIT_VALIDATION, type(exc).__name__, str(exc))
    except RUNTIME_ERRORS as exc:
        return _fail(EXIT_RUNTIME, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
