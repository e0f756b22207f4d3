"""Metrics, per-question-type breakdowns and the ablation harness.

All metrics treat coachable as the positive class (recorded in every report
header); binary precision/recall/F1/accuracy come first, macro-averaged
variants ride along as a secondary view.  Reports render as JSON, as
aligned-column text, and per-type results additionally as CSV.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from coachkit.corpus import Corpus, Label, QuestionSpec
from coachkit.dataset import DatasetSplit
from coachkit.neural.model import ModelConfig, init_model
from coachkit.neural.train import TrainingConfig, train
from coachkit.prep import encode_split, split_labels, tfidf_features, vocab_from_split
from coachkit.util import round_half_away
from coachkit import baselines

POSITIVE_CLASS = "coachable"


class EvalError(Exception):
    pass


class LengthMismatch(EvalError):
    pass


class UnknownQuestionType(EvalError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(predictions: Sequence[Label | int], gold: Sequence[Label | int]) -> ConfusionMatrix:
    if len(predictions) != len(gold):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(gold)} gold labels")
    tp = fp = fn = tn = 0
    for p, g in zip(predictions, gold):
        p, g = int(p), int(g)
        if p == 1 and g == 1:
            tp += 1
        elif p == 1:
            fp += 1
        elif g == 1:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass(frozen=True)
class Metrics:
    precision: float  # percent
    recall: float
    f1: float
    accuracy: float

    def rounded(self) -> dict[str, float]:
        return {
            "precision": round_half_away(self.precision),
            "recall": round_half_away(self.recall),
            "f1": round_half_away(self.f1),
            "accuracy": round_half_away(self.accuracy),
        }


def f1_from_precision_recall(precision: float, recall: float) -> float:
    """Harmonic mean; scale-invariant, so fractions and percents both work."""
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Percent metrics with coachable positive; zero denominators yield 0."""
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0
    accuracy = (cm.tp + cm.tn) / cm.total if cm.total else 0.0
    return Metrics(
        precision=100.0 * precision,
        recall=100.0 * recall,
        f1=100.0 * f1_from_precision_recall(precision, recall),
        accuracy=100.0 * accuracy,
    )


def macro_metrics(cm: ConfusionMatrix) -> Metrics:
    """Unweighted mean over the two one-vs-rest views."""
    pos = metrics(cm)
    neg = metrics(ConfusionMatrix(tp=cm.tn, fp=cm.fn, fn=cm.fp, tn=cm.tp))
    return Metrics(
        precision=(pos.precision + neg.precision) / 2,
        recall=(pos.recall + neg.recall) / 2,
        f1=(pos.f1 + neg.f1) / 2,
        accuracy=pos.accuracy,
    )


def per_type_report(
    predictions: Sequence[Label | int],
    gold: Sequence[Label | int],
    pair_keys: Sequence[tuple[str, str]],
    questions: Mapping[str, QuestionSpec],
) -> dict[str, dict]:
    """Accuracy per question type; types absent from the eval set are
    omitted rather than reported as zero."""
    if not (len(predictions) == len(gold) == len(pair_keys)):
        raise LengthMismatch("predictions, gold and pair_keys must align")
    correct: dict[str, int] = {}
    count: dict[str, int] = {}
    for p, g, (question_id, _) in zip(predictions, gold, pair_keys):
        spec = questions.get(question_id)
        if spec is None:
            raise UnknownQuestionType(f"question {question_id!r} has no known type")
        name = spec.question_type.value
        count[name] = count.get(name, 0) + 1
        correct[name] = correct.get(name, 0) + (int(p) == int(g))
    return {
        name: {"count": count[name], "accuracy": 100.0 * correct[name] / count[name]}
        for name in sorted(count)
    }


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class EvalReport:
    model_id: str
    metrics: Metrics
    macro: Metrics
    confusion: ConfusionMatrix
    per_type: dict[str, dict] = field(default_factory=dict)
    config_snapshot: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "model_id": self.model_id,
            "positive_class": POSITIVE_CLASS,
            "metrics": self.metrics.rounded(),
            "macro_metrics": self.macro.rounded(),
            "confusion": {
                "tp": self.confusion.tp,
                "fp": self.confusion.fp,
                "fn": self.confusion.fn,
                "tn": self.confusion.tn,
            },
            "total": self.confusion.total,
            "per_type_accuracy": {
                name: {
                    "count": entry["count"],
                    "accuracy": round_half_away(entry["accuracy"]),
                }
                for name, entry in self.per_type.items()
            },
            "config_snapshot": self.config_snapshot,
        }


def build_report(
    model_id: str,
    predictions: Sequence[Label | int],
    gold: Sequence[Label | int],
    pair_keys: Sequence[tuple[str, str]] | None = None,
    questions: Mapping[str, QuestionSpec] | None = None,
    config_snapshot: dict | None = None,
) -> EvalReport:
    cm = confusion(predictions, gold)
    per_type = {}
    if pair_keys is not None and questions is not None:
        per_type = per_type_report(predictions, gold, pair_keys, questions)
    return EvalReport(
        model_id=model_id,
        metrics=metrics(cm),
        macro=macro_metrics(cm),
        confusion=cm,
        per_type=per_type,
        config_snapshot=config_snapshot or {},
    )


def report_text(reports: Sequence[EvalReport]) -> str:
    """Aligned columns in the shape of the headline comparison tables."""
    headers = ("Model", "Precision", "Recall", "F1", "Accuracy")
    rows = [headers]
    for r in reports:
        m = r.metrics.rounded()
        rows.append(
            (r.model_id, f"{m['precision']:.2f}", f"{m['recall']:.2f}", f"{m['f1']:.2f}", f"{m['accuracy']:.2f}")
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.append(f"(positive class: {POSITIVE_CLASS})")
    return "\n".join(lines) + "\n"


def per_type_csv(report: EvalReport) -> str:
    lines = ["question_type,count,accuracy"]
    for name, entry in report.per_type.items():
        lines.append(f"{name},{entry['count']},{round_half_away(entry['accuracy']):.2f}")
    return "\n".join(lines) + "\n"


def save_report(report: EvalReport, json_path: str | Path, text_path: str | Path | None = None,
                csv_path: str | Path | None = None) -> None:
    Path(json_path).write_text(
        json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if text_path is not None:
        Path(text_path).write_text(report_text([report]), encoding="utf-8")
    if csv_path is not None:
        Path(csv_path).write_text(per_type_csv(report), encoding="utf-8")


# ---------------------------------------------------------------------------
# Ablation harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AblationCell:
    """One row of an ablation table: a model kind trained at a given input
    length with or without the query."""

    name: str
    model_kind: str  # transformer | nb | svm | tree | forest
    max_len: int = 128
    include_query: bool = True


@dataclass
class DataBundle:
    corpus: Corpus
    train: DatasetSplit
    validation: DatasetSplit
    test: DatasetSplit


def _cell_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(1)[0])


def run_cell(
    cell: AblationCell,
    bundle: DataBundle,
    seed: int,
    model_config: ModelConfig | None = None,
    training_config: TrainingConfig | None = None,
    vocab_size: int = 4000,
    tfidf_max_features: int | None = 4000,
) -> EvalReport:
    """Train the cell's model on the bundle's train split and evaluate on
    its test split.  Splits are shared across cells; only the cell's own
    seed, length and query switch vary."""
    gold = split_labels(bundle.test)
    keys = [p.key for p in bundle.test.pairs]
    snapshot: dict = {
        "model_kind": cell.model_kind,
        "max_len": cell.max_len,
        "include_query": cell.include_query,
        "seed": seed,
    }

    if cell.model_kind == "transformer":
        vocab = vocab_from_split(bundle.corpus, bundle.train, max_size=vocab_size)
        enc = {
            name: encode_split(
                bundle.corpus, split, vocab, cell.max_len, include_query=cell.include_query
            )
            for name, split in (
                ("train", bundle.train),
                ("validation", bundle.validation),
                ("test", bundle.test),
            )
        }
        base = model_config or ModelConfig(
            d_model=64, n_heads=4, n_layers=2, d_ff=128,
            max_len=cell.max_len, vocab_size=vocab.size,
        )
        cfg = ModelConfig(
            d_model=base.d_model, n_heads=base.n_heads, n_layers=base.n_layers,
            d_ff=base.d_ff, max_len=cell.max_len, vocab_size=vocab.size,
            dropout_rate=base.dropout_rate, pooling=base.pooling,
            activation=base.activation, seed=seed,
        )
        tcfg = training_config or TrainingConfig()
        tcfg = TrainingConfig(
            learning_rate=tcfg.learning_rate, epochs=tcfg.epochs, batch_size=tcfg.batch_size,
            beta1=tcfg.beta1, beta2=tcfg.beta2, eps=tcfg.eps, grad_clip=tcfg.grad_clip,
            seed=seed,
        )
        model = init_model(cfg)
        train(model, enc["train"], enc["validation"], tcfg)
        probs = []
        for start in range(0, len(enc["test"]), 64):
            probs.append(
                model.predict_proba(
                    enc["test"].ids[start : start + 64], enc["test"].mask[start : start + 64]
                )
            )
        p = np.concatenate(probs) if probs else np.zeros((0, 2))
        preds = (p[:, Label.COACHABLE] > p[:, Label.NOT_COACHABLE]).astype(int)
        snapshot["model_config"] = {
            "d_model": cfg.d_model, "n_heads": cfg.n_heads, "n_layers": cfg.n_layers,
            "d_ff": cfg.d_ff, "epochs": tcfg.epochs, "learning_rate": tcfg.learning_rate,
        }
    else:
        _, X_train, (X_test,) = tfidf_features(
            bundle.corpus, bundle.train, [bundle.test],
            max_features=tfidf_max_features, include_query=cell.include_query,
        )
        y_train = split_labels(bundle.train)
        if cell.model_kind == "nb":
            model = baselines.train_naive_bayes(X_train, y_train)
        elif cell.model_kind == "svm":
            model = baselines.train_linear_svm(X_train, y_train, seed=seed)
        elif cell.model_kind == "tree":
            model = baselines.train_decision_tree(X_train, y_train)
        elif cell.model_kind == "forest":
            model = baselines.train_random_forest(X_train, y_train, n_trees=20, seed=seed)
        else:
            raise EvalError(f"unknown model kind {cell.model_kind!r}")
        preds = np.array(
            [int(baselines.predict(model, x)[0]) for x in X_test], dtype=int
        )

    return build_report(
        model_id=cell.name,
        predictions=preds,
        gold=gold,
        pair_keys=keys,
        questions=bundle.corpus.questions,
        config_snapshot=snapshot,
    )


def ablation_run(
    grid: Sequence[AblationCell],
    bundle: DataBundle,
    seed: int = 0,
    model_config: ModelConfig | None = None,
    training_config: TrainingConfig | None = None,
) -> list[tuple[AblationCell, EvalReport]]:
    """Train/evaluate every cell with identical splits and per-cell derived
    seeds; rows come back in grid order."""
    if not grid:
        raise EvalError("ablation grid is empty")
    results = []
    for index, cell in enumerate(grid):
        report = run_cell(
            cell, bundle, _cell_seed(seed, index),
            model_config=model_config, training_config=training_config,
        )
        results.append((cell, report))
    return results


def ablation_table(results: Sequence[tuple[AblationCell, EvalReport]]) -> str:
    headers = ("Model", "Precision", "Accuracy")
    rows = [headers]
    for cell, report in results:
        m = report.metrics.rounded()
        rows.append((cell.name, f"{m['precision']:.2f}", f"{m['accuracy']:.2f}"))
    widths = [max(len(row[i]) for row in rows) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines) + "\n"
