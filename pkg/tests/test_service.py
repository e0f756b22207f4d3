import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from coachkit.corpus import QuestionType, save_corpus_file, save_questions_file
from coachkit.service.api import create_app
from coachkit.service.cli import main as cli_main
from coachkit.service.config import ConfigError, ServiceConfig, load_config
from coachkit.synthetic import marker_corpus

TOKEN = "test-token-1"


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Small end-to-end workdir: synthetic corpus, splits, NB artifact."""
    root = tmp_path_factory.mktemp("svc")
    corpus = marker_corpus(
        n_pairs=160, n_types=4, seed=13,
        non_whitelisted=(QuestionType.ACCOUNT_VERIFICATION,),
    )
    raw = root / "raw.jsonl"
    questions = root / "questions.json"
    save_corpus_file(corpus, raw)
    save_questions_file(corpus.questions.values(), questions)
    work = root / "work"
    assert cli_main(["--workdir", str(work), "ingest", str(raw), "--questions", str(questions)]) == 0
    assert cli_main(["--workdir", str(work), "build-dataset", "--seed", "3"]) == 0
    assert cli_main(["--workdir", str(work), "train", "--model", "nb"]) == 0
    assert cli_main([
        "--workdir", str(work), "evaluate", "--model", str(work / "model.nb.json"),
        "--split", "test",
    ]) == 0
    return work


@pytest.fixture()
def service_config(workdir, tmp_path):
    ledger = tmp_path / "ledger.jsonl"
    return ServiceConfig(
        corpus_path=str(workdir / "corpus.jsonl"),
        questions_path=str(workdir / "questions.json"),
        model_path=str(workdir / "model.nb.json"),
        ledger_path=str(ledger),
        report_path=str(workdir / "eval_report.json"),
        auth_tokens=[TOKEN],
        per_agent_cap=5,
        batch_size=6,
    )


@pytest.fixture()
def client(service_config):
    app = create_app(service_config)
    return TestClient(app)


AUTH = {"Authorization": f"Bearer {TOKEN}"}


class TestCli:
    def test_unknown_subcommand_exits_1(self, capsys):
        assert cli_main(["frobnicate"]) == 1

    def test_missing_file_exits_1(self, tmp_path, capsys):
        code = cli_main(
            ["--workdir", str(tmp_path), "ingest", str(tmp_path / "nope.jsonl"),
             "--questions", str(tmp_path / "q.json")]
        )
        assert code == 1
        err = json.loads(capsys.readouterr().err)
        assert "error" in err

    def test_build_dataset_deterministic_bytes(self, workdir, tmp_path, capsys):
        for out in ("w1", "w2"):
            target = tmp_path / out
            target.mkdir()
            for name in ("corpus.jsonl", "questions.json"):
                (target / name).write_bytes((workdir / name).read_bytes())
            assert cli_main(["--workdir", str(target), "build-dataset", "--seed", "7"]) == 0
        a = (tmp_path / "w1" / "splits.json").read_bytes()
        b = (tmp_path / "w2" / "splits.json").read_bytes()
        assert a == b

    def test_evaluate_emits_metrics_json(self, workdir, capsys):
        assert cli_main([
            "--workdir", str(workdir), "evaluate", "--model", str(workdir / "model.nb.json"),
            "--split", "test",
        ]) == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert set(summary["metrics"]) == {"precision", "recall", "f1", "accuracy"}
        assert summary["split"] == "test"

    def test_recommend_writes_label_free_payload(self, workdir, capsys):
        assert cli_main([
            "--workdir", str(workdir), "recommend", "--question", "q-greeting",
            "--model", str(workdir / "model.nb.json"),
        ]) == 0
        payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert payload["items"]
        text = json.dumps(payload).lower()
        for fragment in ('"score', '"label', '"prob'):
            assert fragment not in text

    def test_stats_files_written(self, workdir):
        stats = json.loads((workdir / "stats.json").read_text())
        assert set(stats) == {"train", "validation", "test"}
        table = (workdir / "stats.txt").read_text()
        assert "Avg. Transcript Length" in table

    def test_holdout_questions_mode(self, workdir, tmp_path, capsys):
        target = tmp_path / "holdout"
        target.mkdir()
        for name in ("corpus.jsonl", "questions.json"):
            (target / name).write_bytes((workdir / name).read_bytes())
        assert cli_main(
            ["--workdir", str(target), "build-dataset", "--seed", "5", "--holdout-questions"]
        ) == 0
        manifest = json.loads((target / "splits.json").read_text())
        question_splits: dict[str, set[str]] = {}
        for split_name, pairs in manifest["splits"].items():
            for rec in pairs:
                question_splits.setdefault(rec["question_id"], set()).add(split_name)
        assert question_splits
        assert all(len(splits) == 1 for splits in question_splits.values())

    def test_recommend_agent_filter(self, workdir, capsys):
        corpus_lines = (workdir / "corpus.jsonl").read_text().splitlines()
        agent = next(
            json.loads(line)["agent_id"] for line in corpus_lines
            if json.loads(line).get("kind") == "transcript"
        )
        assert cli_main([
            "--workdir", str(workdir), "recommend", "--question", "q-greeting",
            "--model", str(workdir / "model.nb.json"), "--agent", agent,
        ]) == 0
        payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert payload["items"]
        assert all(item["agent_id"] == agent for item in payload["items"])

    def test_ablate_grid(self, workdir, tmp_path, capsys):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({
            "seed": 4,
            "cells": [
                {"name": "nb base", "model_kind": "nb"},
                {"name": "- without query", "model_kind": "nb", "include_query": False},
            ],
        }))
        assert cli_main(["--workdir", str(workdir), "ablate", "--grid", str(grid)]) == 0
        doc = json.loads((workdir / "ablation.json").read_text())
        assert set(doc) == {"nb base", "- without query"}
        table = (workdir / "ablation.txt").read_text()
        assert table.splitlines()[1].startswith("nb base")


class TestConfig:
    def test_non_localhost_requires_tokens(self, workdir, tmp_path):
        cfg = ServiceConfig(
            corpus_path=str(workdir / "corpus.jsonl"),
            questions_path=str(workdir / "questions.json"),
            model_path=str(workdir / "model.nb.json"),
            ledger_path=str(tmp_path / "ledger.jsonl"),
            host="0.0.0.0",
        )
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_env_override(self, workdir, tmp_path, monkeypatch):
        path = tmp_path / "svc.json"
        path.write_text(json.dumps({
            "corpus_path": str(workdir / "corpus.jsonl"),
            "questions_path": str(workdir / "questions.json"),
            "model_path": str(workdir / "model.nb.json"),
            "ledger_path": str(tmp_path / "ledger.jsonl"),
        }))
        monkeypatch.setenv("COACHKIT_BATCH_SIZE", "9")
        monkeypatch.setenv("COACHKIT_AUTH_TOKENS", "a,b")
        cfg = load_config(path)
        assert cfg.batch_size == 9
        assert cfg.auth_tokens == ["a", "b"]


class TestApi:
    def test_unauthenticated_401(self, client):
        response = client.get("/api/questions")
        assert response.status_code == 401
        assert response.json()["code"] == "unauthenticated"

    def test_questions_whitelisted_only(self, client):
        response = client.get("/api/questions", headers=AUTH)
        assert response.status_code == 200
        ids = [q["question_id"] for q in response.json()]
        assert "q-greeting" in ids
        assert "q-account-verification" not in ids

    def test_non_whitelisted_recommendation_403(self, client):
        response = client.post(
            "/api/recommendations",
            json={"question_id": "q-account-verification", "manager_id": "m-1"},
            headers=AUTH,
        )
        assert response.status_code == 403
        assert response.json()["code"] == "question_not_allowed"

    def test_unknown_question_404(self, client):
        response = client.post(
            "/api/recommendations",
            json={"question_id": "q-nope", "manager_id": "m-1"},
            headers=AUTH,
        )
        assert response.status_code == 404

    def test_recommendation_payload_hides_labels(self, client):
        response = client.post(
            "/api/recommendations",
            json={"question_id": "q-greeting", "manager_id": "m-1"},
            headers=AUTH,
        )
        assert response.status_code == 200
        payload = response.json()
        assert len(payload["items"]) == 6
        text = json.dumps(payload).lower()
        for fragment in ('"score', '"label', '"prob'):
            assert fragment not in text

    def test_call_view_is_redacted_transcript_without_labels(self, client):
        batch = client.post(
            "/api/recommendations",
            json={"question_id": "q-greeting", "manager_id": "m-1"},
            headers=AUTH,
        ).json()
        call_id = batch["items"][0]["call_id"]
        response = client.get(f"/api/calls/{call_id}", headers=AUTH)
        assert response.status_code == 200
        doc = response.json()
        assert doc["call_id"] == call_id
        assert doc["utterances"]
        assert "label" not in json.dumps(doc).lower()

    def test_unknown_call_404(self, client):
        assert client.get("/api/calls/nope", headers=AUTH).status_code == 404

    def test_review_then_duplicate_409(self, client):
        batch = client.post(
            "/api/recommendations",
            json={"question_id": "q-greeting", "manager_id": "m-2"},
            headers=AUTH,
        ).json()
        body = {
            "batch_id": batch["batch_id"],
            "call_id": batch["items"][0]["call_id"],
            "manager_id": "m-2",
            "decision": "positive",
            "rubric_score": 80,
        }
        first = client.post("/api/reviews", json=body, headers=AUTH)
        assert first.status_code == 201
        second = client.post("/api/reviews", json=body, headers=AUTH)
        assert second.status_code == 409

    def test_review_validation_422(self, client):
        response = client.post("/api/reviews", json={"nope": 1}, headers=AUTH)
        assert response.status_code == 422

    def test_latest_report(self, client):
        response = client.get("/api/reports/latest", headers=AUTH)
        assert response.status_code == 200
        assert "metrics" in response.json()

    def test_reload(self, client):
        response = client.post("/api/admin/reload", headers=AUTH)
        assert response.status_code == 200
        assert response.json() == {"reloaded": True}


class TestReplay:
    def test_restart_between_requests_preserves_ledger(self, service_config):
        import numpy as np

        rng = np.random.default_rng(5)
        reference_events = []

        def run_session(config, restart_points):
            app = create_app(config)
            client = TestClient(app)
            batches = []
            for step in range(40):
                if step in restart_points:
                    app = create_app(config)  # simulated process restart
                    client = TestClient(app)
                if step % 2 == 0:
                    response = client.post(
                        "/api/recommendations",
                        json={"question_id": "q-greeting", "manager_id": "m-1"},
                        headers=AUTH,
                    )
                    if response.status_code == 200 and response.json()["items"]:
                        batches.append(response.json())
                elif batches:
                    batch = batches[step % len(batches)]
                    client.post(
                        "/api/reviews",
                        json={
                            "batch_id": batch["batch_id"],
                            "call_id": batch["items"][0]["call_id"],
                            "manager_id": f"m-{step}",
                            "decision": "negative",
                        },
                        headers=AUTH,
                    )
            return app.state.ctx.ledger.state_snapshot()

        restarts = set(int(x) for x in rng.integers(1, 40, size=6))
        final_state = run_session(service_config, restarts)
        replayed = create_app(service_config).state.ctx.ledger.state_snapshot()
        assert final_state == replayed
        assert final_state["batches"]
