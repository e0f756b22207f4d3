"""Guard-railed call recommendations.

Rankings by coachable probability stay internal; what leaves this module is
a label-hidden batch mixing likely-coachable and likely-not calls, capped
per agent over a rolling window, for questions on the whitelist only.  The
review ledger is an append-only JSONL event log; replaying it reconstructs
the full state, so a restart between requests loses nothing.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

from coachkit.corpus import QuestionSpec, ScorecardGrade, Transcript
from coachkit.util import round_half_away

# No serialized payload may carry model-derived numbers or labels; any key
# containing one of these fragments is treated as a leak.
FORBIDDEN_KEY_PARTS = ("score", "label", "prob", "coachable")


class RecommendError(Exception):
    pass


class QuestionNotAllowed(RecommendError):
    """Question is not on the pre-selected whitelist."""


class NothingEligible(RecommendError):
    """Every candidate call is capped out (or there are no candidates)."""


class UnknownBatchItem(RecommendError):
    pass


class DuplicateDecision(RecommendError):
    pass


class LeakedField(RecommendError):
    """A payload intended for managers carries score/label data."""


class CallScorer(Protocol):
    def coachable_probability(self, question_text: str, transcript_text: str) -> float: ...


@dataclass(frozen=True)
class Policy:
    whitelist: frozenset[str]
    per_agent_cap: int = 5
    batch_size: int = 6
    positive_fraction: float = 0.5
    window_days: int = 7
    hide_scores: bool = True  # served payloads are always label-hidden

    def validate(self) -> None:
        if self.per_agent_cap < 1:
            raise RecommendError(f"per_agent_cap must be >= 1, got {self.per_agent_cap}")
        if self.batch_size < 1:
            raise RecommendError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.positive_fraction <= 1.0:
            raise RecommendError(
                f"positive_fraction must be in [0, 1], got {self.positive_fraction}"
            )
        if self.window_days < 1:
            raise RecommendError(f"window_days must be >= 1, got {self.window_days}")


@dataclass(frozen=True)
class BatchItem:
    call_id: str
    agent_id: str
    transcript_ref: str  # pointer, not content: API path of the redacted transcript


@dataclass(frozen=True)
class RecommendationBatch:
    batch_id: str
    question_id: str
    items: tuple[BatchItem, ...]
    created_at: str

    def to_payload(self) -> dict:
        payload = {
            "batch_id": self.batch_id,
            "question_id": self.question_id,
            "created_at": self.created_at,
            "items": [
                {
                    "call_id": item.call_id,
                    "agent_id": item.agent_id,
                    "transcript_ref": item.transcript_ref,
                }
                for item in self.items
            ],
        }
        assert_no_leak(payload)
        return payload


@dataclass(frozen=True)
class ReviewDecision:
    batch_id: str
    call_id: str
    manager_id: str
    decision: str  # "positive" | "negative"
    rubric_score: float | None = None
    comment: str | None = None
    decided_at: str = ""

    def validate(self) -> None:
        if self.decision not in ("positive", "negative"):
            raise RecommendError(f"decision must be positive|negative, got {self.decision!r}")
        if self.rubric_score is not None and not 0 <= self.rubric_score <= 100:
            raise RecommendError(f"rubric_score must be in [0, 100], got {self.rubric_score}")


def assert_no_leak(payload) -> None:
    """Recursively reject any key smelling of scores, labels or probabilities."""

    def walk(node, path: str) -> None:
        if isinstance(node, Mapping):
            for key, value in node.items():
                lowered = str(key).lower()
                if any(part in lowered for part in FORBIDDEN_KEY_PARTS):
                    raise LeakedField(f"forbidden key {key!r} at {path or '$'}")
                walk(value, f"{path}.{key}")
        elif isinstance(node, (list, tuple)):
            for i, value in enumerate(node):
                walk(value, f"{path}[{i}]")

    walk(payload, "")


# ---------------------------------------------------------------------------
# Event-sourced review ledger
# ---------------------------------------------------------------------------


def _parse_ts(value: str) -> datetime:
    return datetime.fromisoformat(value.replace("Z", "+00:00"))


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def _iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


class ReviewLedger:
    """Append-only JSONL event log plus its replayed in-memory state.

    Writes are serialized under a lock; batch commitment and cap accounting
    happen atomically inside it.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._batches: dict[str, dict] = {}
        self._decisions: dict[tuple[str, str, str], dict] = {}
        if self.path.exists():
            self._replay()

    def _replay(self) -> None:
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    self._apply(json.loads(line))

    def _apply(self, event: dict) -> None:
        kind = event.get("event")
        if kind == "batch_created":
            self._batches[event["batch_id"]] = event
        elif kind == "decision_recorded":
            key = (event["batch_id"], event["call_id"], event["manager_id"])
            self._decisions[key] = event
        else:
            raise RecommendError(f"unknown ledger event {kind!r}")

    def _append(self, event: dict) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()
        self._apply(event)

    # -- queries (safe under concurrent reads of immutable dict values) ------

    def agent_item_count(self, agent_id: str, now: datetime, window_days: int) -> int:
        cutoff = now - timedelta(days=window_days)
        count = 0
        for batch in self._batches.values():
            if _parse_ts(batch["created_at"]) <= cutoff:
                continue
            count += sum(1 for item in batch["items"] if item["agent_id"] == agent_id)
        return count

    def batch_item_exists(self, batch_id: str, call_id: str) -> bool:
        batch = self._batches.get(batch_id)
        if batch is None:
            return False
        return any(item["call_id"] == call_id for item in batch["items"])

    def has_decision(self, batch_id: str, call_id: str, manager_id: str) -> bool:
        return (batch_id, call_id, manager_id) in self._decisions

    def decision_count(self, manager_id: str, batch_id: str) -> int:
        return sum(
            1 for (b, _, m) in self._decisions if b == batch_id and m == manager_id
        )

    def state_snapshot(self) -> dict:
        """Canonical state for replay-equality checks."""
        return {
            "batches": {bid: self._batches[bid] for bid in sorted(self._batches)},
            "decisions": [self._decisions[k] for k in sorted(self._decisions)],
        }


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def score_calls(
    scorer: CallScorer,
    question: QuestionSpec,
    calls: Sequence[Transcript],
    policy: Policy,
) -> list[tuple[str, float]]:
    """Internal ranking: (call_id, coachable probability), descending, ties
    by call_id so reruns agree.  Never serialized for managers."""
    if question.question_id not in policy.whitelist:
        raise QuestionNotAllowed(f"question {question.question_id!r} is not whitelisted")
    scored = [
        (call.call_id, scorer.coachable_probability(question.text, call.text()))
        for call in calls
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored


def build_batch(
    scored: Sequence[tuple[str, float]],
    agents: Mapping[str, str],
    question_id: str,
    policy: Policy,
    ledger: ReviewLedger,
    now: datetime | None = None,
    batch_id: str | None = None,
) -> RecommendationBatch:
    """Mix likely-coachable (top of ranking) and likely-not (bottom) calls,
    skip agents at their cap, strip every score, and commit atomically.

    round(batch_size * (1 - positive_fraction)) items come from the top; the
    remainder from the bottom.  Which end each call came from is recorded in
    the ledger event only, never in the served payload.
    """
    policy.validate()
    now = now or utc_now()
    n_top = int(round_half_away(policy.batch_size * (1.0 - policy.positive_fraction), 0))
    n_top = min(n_top, policy.batch_size)
    n_bottom = policy.batch_size - n_top

    with ledger._lock:
        taken: dict[str, int] = {}
        chosen: dict[str, str] = {}  # call_id -> drawn_from

        def eligible(call_id: str) -> bool:
            if call_id in chosen:
                return False
            agent = agents[call_id]
            used = taken.get(agent)
            if used is None:
                used = ledger.agent_item_count(agent, now, policy.window_days)
                taken[agent] = used
            return used < policy.per_agent_cap

        def take(call_id: str, end: str) -> None:
            chosen[call_id] = end
            taken[agents[call_id]] += 1

        picked_top = 0
        for call_id, _ in scored:
            if picked_top >= n_top:
                break
            if eligible(call_id):
                take(call_id, "top")
                picked_top += 1
        picked_bottom = 0
        for call_id, _ in reversed(scored):
            if picked_bottom >= n_bottom:
                break
            if eligible(call_id):
                take(call_id, "bottom")
                picked_bottom += 1

        if not chosen:
            raise NothingEligible("no candidate call is under the per-agent cap")

        order = {call_id: i for i, (call_id, _) in enumerate(scored)}
        items = tuple(
            BatchItem(
                call_id=call_id,
                agent_id=agents[call_id],
                transcript_ref=f"/api/calls/{call_id}",
            )
            for call_id in sorted(chosen, key=order.__getitem__)
        )
        batch = RecommendationBatch(
            batch_id=batch_id or uuid.uuid4().hex,
            question_id=question_id,
            items=items,
            created_at=_iso(now),
        )
        ledger._append(
            {
                "event": "batch_created",
                "batch_id": batch.batch_id,
                "question_id": question_id,
                "created_at": batch.created_at,
                "items": [
                    {
                        "call_id": item.call_id,
                        "agent_id": item.agent_id,
                        "drawn_from": chosen[item.call_id],
                    }
                    for item in items
                ],
            }
        )
    return batch


def record_review(
    decision: ReviewDecision,
    ledger: ReviewLedger,
    grade_sink: Callable[[ScorecardGrade], None] | None = None,
    question_id: str | None = None,
) -> None:
    """Persist a manager's final decision.

    With a grade_sink configured (off by default), the decision re-enters
    the corpus as a scorecard grade for future retraining.
    """
    decision.validate()
    with ledger._lock:
        if not ledger.batch_item_exists(decision.batch_id, decision.call_id):
            raise UnknownBatchItem(
                f"call {decision.call_id!r} is not part of batch {decision.batch_id!r}"
            )
        if ledger.has_decision(decision.batch_id, decision.call_id, decision.manager_id):
            raise DuplicateDecision(
                f"manager {decision.manager_id!r} already decided on "
                f"({decision.batch_id!r}, {decision.call_id!r})"
            )
        event = {
            "event": "decision_recorded",
            "batch_id": decision.batch_id,
            "call_id": decision.call_id,
            "manager_id": decision.manager_id,
            "decision": decision.decision,
            "rubric_score": decision.rubric_score,
            "comment": decision.comment,
            "decided_at": decision.decided_at or _iso(utc_now()),
        }
        ledger._append(event)
        batch_question_id = ledger._batches[decision.batch_id]["question_id"]
    if grade_sink is not None:
        qid = question_id or batch_question_id
        if decision.rubric_score is not None:
            score = float(decision.rubric_score)
        else:
            score = 100.0 if decision.decision == "positive" else 0.0
        grade_sink(
            ScorecardGrade(
                call_id=decision.call_id,
                question_id=qid,
                score=score,
                max_score=100.0,
                grader_id=decision.manager_id,
                timestamp=event["decided_at"],
            )
        )
