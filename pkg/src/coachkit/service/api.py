"""HTTP API for the review console.

Bearer-token authenticated JSON endpoints; every payload that describes
calls or batches passes the no-leak schema assertion before it leaves the
process.  The model artifact is loaded once and swapped atomically on
reload; ledger writes are serialized by the ledger itself.
"""

from __future__ import annotations

import json
import threading
from datetime import datetime
from pathlib import Path
from typing import Callable

from fastapi import Depends, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from coachkit.corpus import Corpus, load_corpus_file, load_questions_file
from coachkit.recommend import (
    DuplicateDecision,
    NothingEligible,
    QuestionNotAllowed,
    RecommendError,
    ReviewDecision,
    ReviewLedger,
    UnknownBatchItem,
    assert_no_leak,
    build_batch,
    record_review,
    score_calls,
    utc_now,
)
from coachkit.service.config import ServiceConfig
from coachkit.service.scoring import load_scorer


class RecommendationRequest(BaseModel):
    question_id: str
    manager_id: str
    agent_id: str | None = None  # optional filter; default fleet-wide


class ReviewRequest(BaseModel):
    batch_id: str
    call_id: str
    manager_id: str
    decision: str
    rubric_score: float | None = None
    comment: str | None = None


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


class ServiceContext:
    def __init__(self, config: ServiceConfig, clock: Callable[[], datetime] | None = None):
        config.validate()
        self.config = config
        self.clock = clock or utc_now
        self.corpus = Corpus()
        load_questions_file(config.questions_path, self.corpus)
        # corpus files written by `ingest` are already redacted
        load_corpus_file(config.corpus_path, self.corpus, patterns=None)
        whitelist = frozenset(
            q.question_id for q in self.corpus.questions.values() if q.whitelisted
        )
        self.policy = config.policy(whitelist)
        self.ledger = ReviewLedger(config.ledger_path)
        self._scorer_lock = threading.Lock()
        self._scorer = load_scorer(config.model_path, config.vocab_path)

    @property
    def scorer(self):
        with self._scorer_lock:
            return self._scorer

    def reload_scorer(self) -> None:
        replacement = load_scorer(self.config.model_path, self.config.vocab_path)
        with self._scorer_lock:
            self._scorer = replacement

    def grade_sink(self):
        if not self.config.feedback_to_corpus:
            return None
        return self.corpus.add_grade


def create_app(
    config: ServiceConfig, clock: Callable[[], datetime] | None = None
) -> FastAPI:
    ctx = ServiceContext(config, clock=clock)
    app = FastAPI(title="coachkit", docs_url=None, redoc_url=None)
    app.state.ctx = ctx

    def authenticated(request: Request) -> None:
        if not config.auth_tokens:
            return
        header = request.headers.get("authorization", "")
        token = header.removeprefix("Bearer ").strip() if header.startswith("Bearer ") else ""
        if token not in config.auth_tokens:
            raise PermissionError("missing or invalid bearer token")

    @app.exception_handler(PermissionError)
    async def _unauthenticated(_req, exc):
        return _error(401, "unauthenticated", str(exc))

    @app.exception_handler(RequestValidationError)
    async def _invalid(_req, exc):
        return _error(422, "validation_error", str(exc))

    @app.exception_handler(RecommendError)
    async def _recommend_error(_req, exc):
        if isinstance(exc, QuestionNotAllowed):
            return _error(403, "question_not_allowed", str(exc))
        if isinstance(exc, UnknownBatchItem):
            return _error(404, "unknown_batch_item", str(exc))
        if isinstance(exc, DuplicateDecision):
            return _error(409, "duplicate_decision", str(exc))
        return _error(422, "invalid_request", str(exc))

    @app.get("/api/questions")
    async def list_questions(_: None = Depends(authenticated)):
        return [
            q.to_record()
            for q in sorted(ctx.corpus.questions.values(), key=lambda q: q.question_id)
            if q.whitelisted
        ]

    @app.post("/api/recommendations")
    async def recommend(body: RecommendationRequest, _: None = Depends(authenticated)):
        question = ctx.corpus.questions.get(body.question_id)
        if question is None:
            return _error(404, "unknown_question", f"no question {body.question_id!r}")
        calls = list(ctx.corpus.transcripts.values())
        if body.agent_id is not None:
            calls = [c for c in calls if c.agent_id == body.agent_id]
        ranked = score_calls(ctx.scorer, question, calls, ctx.policy)
        agents = {c.call_id: c.agent_id for c in calls}
        try:
            batch = build_batch(
                ranked, agents, question.question_id, ctx.policy, ctx.ledger, now=ctx.clock()
            )
        except NothingEligible:
            payload = {
                "batch_id": None,
                "question_id": question.question_id,
                "created_at": None,
                "items": [],
            }
            assert_no_leak(payload)
            return payload
        return batch.to_payload()

    @app.get("/api/calls/{call_id}")
    async def get_call(call_id: str, _: None = Depends(authenticated)):
        transcript = ctx.corpus.transcripts.get(call_id)
        if transcript is None:
            return _error(404, "unknown_call", f"no call {call_id!r}")
        payload = {
            "call_id": transcript.call_id,
            "agent_id": transcript.agent_id,
            "timestamp": transcript.timestamp,
            "utterances": [
                {"speaker": u.speaker, "text": u.text} for u in transcript.utterances
            ],
        }
        assert_no_leak(payload)
        return payload

    @app.post("/api/reviews", status_code=201)
    async def post_review(body: ReviewRequest, _: None = Depends(authenticated)):
        decision = ReviewDecision(
            batch_id=body.batch_id,
            call_id=body.call_id,
            manager_id=body.manager_id,
            decision=body.decision,
            rubric_score=body.rubric_score,
            comment=body.comment,
        )
        record_review(decision, ctx.ledger, grade_sink=ctx.grade_sink())
        return {"status": "recorded"}

    @app.get("/api/reports/latest")
    async def latest_report(_: None = Depends(authenticated)):
        path = ctx.config.report_path
        if not path or not Path(path).exists():
            return _error(404, "no_report", "no evaluation report available")
        return json.loads(Path(path).read_text(encoding="utf-8"))

    @app.post("/api/admin/reload")
    async def reload_model(_: None = Depends(authenticated)):
        ctx.reload_scorer()
        return {"reloaded": True}

    return app
