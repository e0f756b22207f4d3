import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coachkit.corpus import Label, QuestionSpec, QuestionType
from coachkit.dataset import balance_per_question, make_splits
from coachkit.evaluation import (
    AblationCell,
    ConfusionMatrix,
    DataBundle,
    EvalError,
    LengthMismatch,
    UnknownQuestionType,
    ablation_run,
    ablation_table,
    build_report,
    confusion,
    f1_from_precision_recall,
    macro_metrics,
    metrics,
    per_type_csv,
    per_type_report,
    report_text,
    run_cell,
)
from coachkit.synthetic import marker_corpus

C, N = Label.COACHABLE, Label.NOT_COACHABLE


class TestConfusion:
    def test_direct_tally(self):
        preds = [C, C, C, C, N, N, N, N, N, N]
        gold = [C, N, C, C, C, N, N, N, C, N]
        cm = confusion(preds, gold)
        assert (cm.tp, cm.fp, cm.fn, cm.tn) == (3, 1, 2, 4)

    def test_all_correct_off_diagonal_zero(self):
        preds = gold = [C, N, C, N, C]
        cm = confusion(preds, gold)
        assert cm.fp == 0 and cm.fn == 0
        assert cm.tp + cm.tn == 5

    def test_empty(self):
        cm = confusion([], [])
        assert (cm.tp, cm.fp, cm.fn, cm.tn) == (0, 0, 0, 0)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion([C], [C, N])

    @settings(max_examples=80, deadline=None)
    @given(
        pairs=st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), max_size=60),
        seed=st.integers(0, 10_000),
    )
    def test_matches_bruteforce_tally_and_permutation_invariance(self, pairs, seed):
        preds = [p for p, _ in pairs]
        gold = [g for _, g in pairs]
        cm = confusion(preds, gold)
        # independent tally
        tp = sum(1 for p, g in pairs if p == 1 and g == 1)
        fp = sum(1 for p, g in pairs if p == 1 and g == 0)
        fn = sum(1 for p, g in pairs if p == 0 and g == 1)
        tn = sum(1 for p, g in pairs if p == 0 and g == 0)
        assert (cm.tp, cm.fp, cm.fn, cm.tn) == (tp, fp, fn, tn)
        # permutation invariance of the metrics
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(pairs))
        shuffled = confusion([preds[i] for i in order], [gold[i] for i in order])
        assert metrics(shuffled) == metrics(cm)


class TestMetrics:
    def test_worked_example(self):
        m = metrics(ConfusionMatrix(tp=3, fp=1, fn=2, tn=4)).rounded()
        assert m == {"precision": 75.00, "recall": 60.00, "f1": 66.67, "accuracy": 70.00}

    def test_zero_denominator_convention(self):
        m = metrics(ConfusionMatrix(tp=0, fp=0, fn=3, tn=2))
        assert m.precision == 0.0 and m.f1 == 0.0

    def test_published_headline_f1_is_consistent(self):
        # the reference comparison row reads P=67.92 R=63.72 F1=65.76;
        # harmonic mean must reproduce that F1 within 0.02
        assert abs(f1_from_precision_recall(67.92, 63.72) - 65.76) < 0.02

    def test_positive_class_swap(self):
        cm = ConfusionMatrix(tp=3, fp=1, fn=2, tn=4)
        swapped = ConfusionMatrix(tp=cm.tn, fp=cm.fn, fn=cm.fp, tn=cm.tp)
        m, s = metrics(cm), metrics(swapped)
        assert s.precision == pytest.approx(100.0 * cm.tn / (cm.tn + cm.fn))
        assert s.accuracy == pytest.approx(m.accuracy)

    def test_macro_is_mean_of_views(self):
        cm = ConfusionMatrix(tp=3, fp=1, fn=2, tn=4)
        m = macro_metrics(cm)
        pos = metrics(cm)
        neg = metrics(ConfusionMatrix(tp=4, fp=2, fn=1, tn=3))
        assert m.precision == pytest.approx((pos.precision + neg.precision) / 2)
        assert m.accuracy == pytest.approx(pos.accuracy)


def make_questions():
    return {
        "q-g": QuestionSpec("q-g", "greeting?", QuestionType.GREETING),
        "q-c": QuestionSpec("q-c", "closing?", QuestionType.CLOSING),
        "q-b": QuestionSpec("q-b", "behavior?", QuestionType.BEHAVIORAL),
    }


class TestPerType:
    def test_single_type_all_correct(self):
        questions = make_questions()
        keys = [("q-g", f"c{i}") for i in range(4)]
        report = per_type_report([C, N, C, N], [C, N, C, N], keys, questions)
        assert list(report) == ["Greeting"]
        assert report["Greeting"]["accuracy"] == pytest.approx(100.0)

    def test_unknown_question_rejected(self):
        with pytest.raises(UnknownQuestionType):
            per_type_report([C], [C], [("q-missing", "c0")], make_questions())

    def test_absent_types_omitted(self):
        questions = make_questions()
        keys = [("q-g", "c0"), ("q-c", "c1")]
        report = per_type_report([C, C], [C, N], keys, questions)
        assert set(report) == {"Greeting", "Closing"}

    def test_matches_groupby_oracle_on_fixture(self):
        rng = np.random.default_rng(17)
        questions = make_questions()
        qids = ["q-g", "q-c", "q-b"]
        keys = [(qids[int(rng.integers(0, 3))], f"c{i}") for i in range(50)]
        preds = [int(rng.integers(0, 2)) for _ in range(50)]
        gold = [int(rng.integers(0, 2)) for _ in range(50)]
        report = per_type_report(preds, gold, keys, questions)

        # brute-force group-by tally
        groups: dict[str, list[int]] = {}
        for (qid, _), p, g in zip(keys, preds, gold):
            groups.setdefault(questions[qid].question_type.value, []).append(p == g)
        for name, hits in groups.items():
            assert report[name]["count"] == len(hits)
            assert report[name]["accuracy"] == pytest.approx(100.0 * sum(hits) / len(hits))

    def test_accuracy_equals_count_weighted_mean_of_type_accuracies(self):
        rng = np.random.default_rng(23)
        questions = make_questions()
        qids = ["q-g", "q-c", "q-b"]
        keys = [(qids[int(rng.integers(0, 3))], f"c{i}") for i in range(60)]
        preds = [int(rng.integers(0, 2)) for _ in range(60)]
        gold = [int(rng.integers(0, 2)) for _ in range(60)]
        report = build_report("m", preds, gold, keys, questions)
        weighted = sum(
            entry["count"] * entry["accuracy"] for entry in report.per_type.values()
        ) / sum(entry["count"] for entry in report.per_type.values())
        assert report.metrics.accuracy == pytest.approx(weighted)
        assert sum(e["count"] for e in report.per_type.values()) == report.confusion.total


class TestReports:
    def test_json_shape(self):
        report = build_report("demo", [C, N], [C, C], config_snapshot={"seed": 1})
        doc = report.to_json()
        assert doc["positive_class"] == "coachable"
        assert set(doc["metrics"]) == {"precision", "recall", "f1", "accuracy"}
        assert doc["config_snapshot"] == {"seed": 1}
        assert doc["total"] == 2

    def test_text_table_columns(self):
        report = build_report("demo", [C, N], [C, C])
        text = report_text([report])
        header = text.splitlines()[0]
        for column in ("Model", "Precision", "Recall", "F1", "Accuracy"):
            assert column in header
        assert "demo" in text

    def test_csv(self):
        questions = make_questions()
        report = build_report("demo", [C], [C], [("q-g", "c0")], questions)
        csv = per_type_csv(report)
        assert csv.splitlines()[0] == "question_type,count,accuracy"
        assert "Greeting,1,100.00" in csv


class TestAblationHarness:
    @pytest.fixture(scope="class")
    def bundle(self):
        corpus = marker_corpus(n_pairs=120, n_types=4, seed=6)
        pairs = balance_per_question(corpus.labeled_pairs(), seed=6)
        train, valid, test = make_splits(pairs, (0.7, 0.1, 0.2), seed=6)
        return DataBundle(corpus=corpus, train=train, validation=valid, test=test)

    def test_empty_grid_rejected(self, bundle):
        with pytest.raises(EvalError):
            ablation_run([], bundle)

    def test_single_cell_matches_standalone_run(self, bundle):
        cell = AblationCell(name="nb base", model_kind="nb")
        (_, via_grid), = ablation_run([cell], bundle, seed=4)
        standalone = run_cell(cell, bundle, seed=np.random.SeedSequence([4, 0]).generate_state(1)[0])
        assert via_grid.to_json() == standalone.to_json()

    def test_table_rows_in_grid_order(self, bundle):
        grid = [
            AblationCell(name="nb base", model_kind="nb"),
            AblationCell(name="- without query", model_kind="nb", include_query=False),
        ]
        results = ablation_run(grid, bundle, seed=4)
        table = ablation_table(results)
        lines = table.splitlines()
        assert "Model" in lines[0] and "Precision" in lines[0] and "Accuracy" in lines[0]
        assert lines[1].startswith("nb base")
        assert lines[2].startswith("- without query")
